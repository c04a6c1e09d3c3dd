#pragma once

#include <optional>

#include <json.hpp>

#include "clr/classifiers.hpp"
#include "clr/hard_clr.hpp"
#include "clr/soft_clr.hpp"

namespace clr {

struct PredictionStrategy {
    enum class Mode { label, weighted };
    enum class WeightSource { classifier_proba, kplane_distance, cluster_size, mixture_pi };
    enum class LabelSource { classifier, nearest_centroid, constraint_lookup };

    Mode mode = Mode::label;
    WeightSource weight_source = WeightSource::classifier_proba;
    LabelSource label_source = LabelSource::classifier;
    bool kplane_inverse = false;  // nonstandard variant, see kplane_weights
};

struct ClrPredictor {
    ClusterwiseModel clusterwise;
    PredictionStrategy strategy;
    std::optional<LabelPredictor> predictor;  // classifier / lookup state when needed
    Vecd mixture_pi;                          // set for soft fits, used by mixture_pi weights
};

struct EnsemblePredictor {
    std::vector<ClrPredictor> members;
};

// |x - c_i| / sum_j |x - c_j|: the weight grows with distance. Looks
// inverted but matches the classic k-plane formulation, and the benchmarks
// keep it. inverse=true normalizes 1/|x - c_i| instead and is off the
// default path. All-zero distances give uniform weights.
Vecd kplane_weights(const Matd& centroids, const Eigen::Ref<const Vecd>& x, bool inverse = false);

Vecd size_weights(const std::vector<int>& sizes);

LinearModel pi_collapse(const MixtureParams& params);

Vecd predict_label_mode(const ClrPredictor& pred, const Matd& X,
                        const std::vector<std::string>* groups = nullptr);

Vecd predict_weighted(const ClrPredictor& pred, const Matd& X);

// dispatches on strategy.mode
Vecd predict(const ClrPredictor& pred, const Matd& X,
             const std::vector<std::string>* groups = nullptr);

Vecd predict_ensemble(const EnsemblePredictor& ens, const Matd& X,
                      const std::vector<std::string>* groups = nullptr);

nlohmann::json predictor_to_json(const ClrPredictor& pred);
ClrPredictor predictor_from_json(const nlohmann::json& j);
nlohmann::json ensemble_to_json(const EnsemblePredictor& ens);
EnsemblePredictor ensemble_from_json(const nlohmann::json& j);

}  // namespace clr
