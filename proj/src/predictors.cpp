#include "clr/predictors.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace clr {

using nlohmann::json;

Vecd kplane_weights(const Matd& centroids, const Eigen::Ref<const Vecd>& x, bool inverse) {
    const int k = static_cast<int>(centroids.rows());
    if (centroids.cols() != x.size())
        throw DimensionMismatch("kplane_weights: centroid/query dimension mismatch");
    Vecd d(k);
    for (int i = 0; i < k; ++i) d[i] = (centroids.row(i).transpose() - x).norm();
    const double total = d.sum();
    if (total <= 0.0) return Vecd::Constant(k, 1.0 / k);
    if (!inverse) return d / total;
    for (int i = 0; i < k; ++i) {
        if (d[i] == 0.0) {  // query sits on a centroid: all weight there
            Vecd v = Vecd::Zero(k);
            v[i] = 1.0;
            return v;
        }
    }
    Vecd inv = d.cwiseInverse();
    return inv / inv.sum();
}

Vecd size_weights(const std::vector<int>& sizes) {
    double total = 0;
    for (int s : sizes) total += s;
    if (sizes.empty() || total <= 0) throw EmptyGroup("size_weights: no populated clusters");
    Vecd v(static_cast<int>(sizes.size()));
    for (std::size_t i = 0; i < sizes.size(); ++i) v[static_cast<int>(i)] = sizes[i] / total;
    return v;
}

LinearModel pi_collapse(const MixtureParams& params) {
    const int k = static_cast<int>(params.models.size());
    if (k == 0) throw InvalidSpec("pi_collapse: empty mixture");
    LinearModel out;
    out.w = Vecd::Zero(params.models[0].w.size());
    out.b = 0.0;
    for (int i = 0; i < k; ++i) {
        out.w += params.pi[i] * params.models[i].w;
        out.b += params.pi[i] * params.models[i].b;
    }
    return out;
}

namespace {

// n x k matrix of every cluster's prediction for every row
Matd component_predictions(const ClusterwiseModel& cm, const Matd& X) {
    const int k = static_cast<int>(cm.models.size());
    Matd P(X.rows(), k);
    for (int i = 0; i < k; ++i) P.col(i) = predict_affine(X, cm.models[i].w, cm.models[i].b);
    return P;
}

int nearest_centroid_label(const Matd& centroids, const Eigen::Ref<const Vecd>& x) {
    int best = 0;
    double best_d = (centroids.row(0).transpose() - x).squaredNorm();
    for (int i = 1; i < centroids.rows(); ++i) {
        const double di = (centroids.row(i).transpose() - x).squaredNorm();
        if (di < best_d) {
            best_d = di;
            best = i;
        }
    }
    return best;
}

}  // namespace

Vecd predict_label_mode(const ClrPredictor& pred, const Matd& X,
                        const std::vector<std::string>* groups) {
    const auto& cm = pred.clusterwise;
    const int n = static_cast<int>(X.rows());
    if (X.cols() != cm.centroids.cols())
        throw DimensionMismatch("predict_label_mode: feature width mismatch");
    const Matd P = component_predictions(cm, X);
    Vecd out(n);

    switch (pred.strategy.label_source) {
        case PredictionStrategy::LabelSource::classifier: {
            if (!pred.predictor || (pred.predictor->kind != LabelPredictor::Kind::logistic &&
                                    pred.predictor->kind != LabelPredictor::Kind::random_forest))
                throw InvalidSpec("label mode: classifier strategy without a trained classifier");
            VecXi labels = predict_label(*pred.predictor, X);
            for (int j = 0; j < n; ++j) out[j] = P(j, labels[j]);
            return out;
        }
        case PredictionStrategy::LabelSource::nearest_centroid: {
            for (int j = 0; j < n; ++j)
                out[j] = P(j, nearest_centroid_label(cm.centroids, X.row(j).transpose()));
            return out;
        }
        case PredictionStrategy::LabelSource::constraint_lookup: {
            if (!pred.predictor || pred.predictor->kind != LabelPredictor::Kind::constraint_lookup)
                throw InvalidSpec("label mode: lookup strategy without a lookup table");
            if (groups == nullptr || static_cast<int>(groups->size()) != n)
                throw InvalidSpec("label mode: lookup strategy needs a group id per row");
            // groups never seen in training fall back to a size-weighted blend
            Vecd fallback = size_weights(cm.sizes);
            for (int j = 0; j < n; ++j) {
                auto label = lookup_group_label(*pred.predictor, (*groups)[j]);
                if (label)
                    out[j] = P(j, *label);
                else
                    out[j] = P.row(j) * fallback;
            }
            return out;
        }
    }
    throw InvalidSpec("predict_label_mode: unknown label source");
}

Vecd predict_weighted(const ClrPredictor& pred, const Matd& X) {
    const auto& cm = pred.clusterwise;
    const int n = static_cast<int>(X.rows());
    const int k = static_cast<int>(cm.models.size());
    if (X.cols() != cm.centroids.cols())
        throw DimensionMismatch("predict_weighted: feature width mismatch");
    const Matd P = component_predictions(cm, X);
    Matd V(n, k);

    switch (pred.strategy.weight_source) {
        case PredictionStrategy::WeightSource::classifier_proba: {
            if (!pred.predictor)
                throw InvalidSpec("weighted mode: proba strategy without a trained classifier");
            V = predict_proba(*pred.predictor, X);
            break;
        }
        case PredictionStrategy::WeightSource::kplane_distance: {
            for (int j = 0; j < n; ++j)
                V.row(j) = kplane_weights(cm.centroids, X.row(j).transpose(),
                                          pred.strategy.kplane_inverse)
                               .transpose();
            break;
        }
        case PredictionStrategy::WeightSource::cluster_size: {
            V = size_weights(cm.sizes).transpose().replicate(n, 1);
            break;
        }
        case PredictionStrategy::WeightSource::mixture_pi: {
            if (pred.mixture_pi.size() != k)
                throw InvalidSpec("weighted mode: mixture_pi weights need mixture proportions");
            V = pred.mixture_pi.transpose().replicate(n, 1);
            break;
        }
    }
    return (V.array() * P.array()).rowwise().sum().matrix();
}

Vecd predict(const ClrPredictor& pred, const Matd& X, const std::vector<std::string>* groups) {
    if (pred.strategy.mode == PredictionStrategy::Mode::label)
        return predict_label_mode(pred, X, groups);
    return predict_weighted(pred, X);
}

Vecd predict_ensemble(const EnsemblePredictor& ens, const Matd& X,
                      const std::vector<std::string>* groups) {
    if (ens.members.empty()) throw InvalidSpec("predict_ensemble: no members");
    Vecd acc = Vecd::Zero(X.rows());
    for (const auto& m : ens.members) acc += predict(m, X, groups);
    return acc / static_cast<double>(ens.members.size());
}

namespace {

json vec_to_json(const Vecd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vecd vec_from_json(const json& a) {
    Vecd v(static_cast<int>(a.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = a.at(i).get<double>();
    return v;
}

json mat_to_json(const Matd& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
    return rows;
}

Matd mat_from_json(const json& rows, int expect_cols = -1) {
    const int nr = static_cast<int>(rows.size());
    if (nr == 0) return Matd(0, std::max(expect_cols, 0));
    const int nc = static_cast<int>(rows.at(0).size());
    if (expect_cols >= 0 && nc != expect_cols)
        throw ParseError("matrix field has unexpected width");
    Matd m(nr, nc);
    for (int r = 0; r < nr; ++r) {
        const auto& row = rows.at(r);
        if (static_cast<int>(row.size()) != nc) throw ParseError("ragged matrix field");
        for (int c = 0; c < nc; ++c) m(r, c) = row.at(c).get<double>();
    }
    return m;
}

const char* mode_name(PredictionStrategy::Mode m) {
    return m == PredictionStrategy::Mode::label ? "label" : "weighted";
}

PredictionStrategy::Mode mode_from_name(const std::string& s) {
    if (s == "label") return PredictionStrategy::Mode::label;
    if (s == "weighted") return PredictionStrategy::Mode::weighted;
    throw ParseError("unknown prediction mode: " + s);
}

const char* weight_name(PredictionStrategy::WeightSource w) {
    switch (w) {
        case PredictionStrategy::WeightSource::classifier_proba: return "classifier_proba";
        case PredictionStrategy::WeightSource::kplane_distance: return "kplane_distance";
        case PredictionStrategy::WeightSource::cluster_size: return "cluster_size";
        case PredictionStrategy::WeightSource::mixture_pi: return "mixture_pi";
    }
    return "classifier_proba";
}

PredictionStrategy::WeightSource weight_from_name(const std::string& s) {
    if (s == "classifier_proba") return PredictionStrategy::WeightSource::classifier_proba;
    if (s == "kplane_distance") return PredictionStrategy::WeightSource::kplane_distance;
    if (s == "cluster_size") return PredictionStrategy::WeightSource::cluster_size;
    if (s == "mixture_pi") return PredictionStrategy::WeightSource::mixture_pi;
    throw ParseError("unknown weight source: " + s);
}

const char* label_source_name(PredictionStrategy::LabelSource l) {
    switch (l) {
        case PredictionStrategy::LabelSource::classifier: return "classifier";
        case PredictionStrategy::LabelSource::nearest_centroid: return "nearest_centroid";
        case PredictionStrategy::LabelSource::constraint_lookup: return "constraint_lookup";
    }
    return "classifier";
}

PredictionStrategy::LabelSource label_source_from_name(const std::string& s) {
    if (s == "classifier") return PredictionStrategy::LabelSource::classifier;
    if (s == "nearest_centroid") return PredictionStrategy::LabelSource::nearest_centroid;
    if (s == "constraint_lookup") return PredictionStrategy::LabelSource::constraint_lookup;
    throw ParseError("unknown label source: " + s);
}

json label_predictor_to_json(const LabelPredictor& p) {
    json j;
    j["n_classes"] = p.n_classes;
    switch (p.kind) {
        case LabelPredictor::Kind::logistic:
            j["kind"] = "logistic";
            j["W"] = mat_to_json(p.W);
            j["bias"] = vec_to_json(p.bias);
            break;
        case LabelPredictor::Kind::random_forest: {
            j["kind"] = "random_forest";
            json trees = json::array();
            for (const auto& t : p.trees) {
                json nodes = json::array();
                for (const auto& nd : t.nodes) {
                    nodes.push_back({{"f", nd.feature},
                                     {"t", nd.threshold},
                                     {"l", nd.left},
                                     {"r", nd.right},
                                     {"v", vec_to_json(nd.value)}});
                }
                trees.push_back(std::move(nodes));
            }
            j["trees"] = std::move(trees);
            break;
        }
        case LabelPredictor::Kind::nearest_centroid:
            j["kind"] = "nearest_centroid";
            j["centroids"] = mat_to_json(p.centroids);
            break;
        case LabelPredictor::Kind::constraint_lookup: {
            j["kind"] = "constraint_lookup";
            json table = json::object();
            for (const auto& [token, label] : p.group_label) table[token] = label;
            j["table"] = std::move(table);
            break;
        }
    }
    return j;
}

LabelPredictor label_predictor_from_json(const json& j) {
    LabelPredictor p;
    p.n_classes = j.at("n_classes").get<int>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "logistic") {
        p.kind = LabelPredictor::Kind::logistic;
        p.W = mat_from_json(j.at("W"));
        p.bias = vec_from_json(j.at("bias"));
    } else if (kind == "random_forest") {
        p.kind = LabelPredictor::Kind::random_forest;
        for (const auto& tj : j.at("trees")) {
            DecisionTree t;
            for (const auto& nj : tj) {
                TreeNode nd;
                nd.feature = nj.at("f").get<int>();
                nd.threshold = nj.at("t").get<double>();
                nd.left = nj.at("l").get<int>();
                nd.right = nj.at("r").get<int>();
                nd.value = vec_from_json(nj.at("v"));
                t.nodes.push_back(std::move(nd));
            }
            p.trees.push_back(std::move(t));
        }
    } else if (kind == "nearest_centroid") {
        p.kind = LabelPredictor::Kind::nearest_centroid;
        p.centroids = mat_from_json(j.at("centroids"));
    } else if (kind == "constraint_lookup") {
        p.kind = LabelPredictor::Kind::constraint_lookup;
        for (const auto& [token, label] : j.at("table").items())
            p.group_label[token] = label.get<int>();
    } else {
        throw ParseError("unknown label predictor kind: " + kind);
    }
    return p;
}

}  // namespace

nlohmann::json predictor_to_json(const ClrPredictor& pred) {
    const auto& cm = pred.clusterwise;
    json clusters = json::array();
    for (std::size_t i = 0; i < cm.models.size(); ++i) {
        clusters.push_back({{"w", vec_to_json(cm.models[i].w)},
                            {"b", cm.models[i].b},
                            {"centroid", vec_to_json(cm.centroids.row(static_cast<int>(i)).transpose())},
                            {"size", cm.sizes[i]}});
    }
    json j;
    j["format"] = "clr-predictor";
    j["version"] = 1;
    json reg = {{"kind", to_string(cm.config.regressor.kind)},
                {"lambda", cm.config.regressor.lambda}};
    j["config"] = {{"k", cm.config.k},
                   {"gamma", cm.config.gamma},
                   {"max_iter", cm.config.max_iter},
                   {"seed", cm.config.seed},
                   {"regressor", std::move(reg)}};
    j["clusters"] = std::move(clusters);
    j["strategy"] = {{"mode", mode_name(pred.strategy.mode)},
                     {"weight_source", weight_name(pred.strategy.weight_source)},
                     {"label_source", label_source_name(pred.strategy.label_source)},
                     {"kplane_inverse", pred.strategy.kplane_inverse}};
    j["mixture_pi"] = vec_to_json(pred.mixture_pi);
    if (pred.predictor)
        j["predictor"] = label_predictor_to_json(*pred.predictor);
    else
        j["predictor"] = nullptr;
    return j;
}

ClrPredictor predictor_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "clr-predictor")
        throw ParseError("not a predictor document");
    ClrPredictor pred;
    const auto& cfg = j.at("config");
    pred.clusterwise.config.k = cfg.at("k").get<int>();
    pred.clusterwise.config.gamma = cfg.at("gamma").get<double>();
    pred.clusterwise.config.max_iter = cfg.at("max_iter").get<int>();
    pred.clusterwise.config.seed = cfg.at("seed").get<std::uint64_t>();
    pred.clusterwise.config.regressor.kind =
        regressor_kind_from_string(cfg.at("regressor").at("kind").get<std::string>());
    pred.clusterwise.config.regressor.lambda = cfg.at("regressor").at("lambda").get<double>();

    const auto& clusters = j.at("clusters");
    const int k = static_cast<int>(clusters.size());
    if (k == 0) throw ParseError("predictor document has no clusters");
    const int d = static_cast<int>(clusters.at(0).at("w").size());
    pred.clusterwise.centroids = Matd(k, d);
    for (int i = 0; i < k; ++i) {
        const auto& c = clusters.at(i);
        LinearModel m;
        m.w = vec_from_json(c.at("w"));
        m.b = c.at("b").get<double>();
        if (m.w.size() != d) throw ParseError("inconsistent cluster widths");
        pred.clusterwise.models.push_back(std::move(m));
        pred.clusterwise.centroids.row(i) = vec_from_json(c.at("centroid")).transpose();
        pred.clusterwise.sizes.push_back(c.at("size").get<int>());
    }

    const auto& s = j.at("strategy");
    pred.strategy.mode = mode_from_name(s.at("mode").get<std::string>());
    pred.strategy.weight_source = weight_from_name(s.at("weight_source").get<std::string>());
    pred.strategy.label_source = label_source_from_name(s.at("label_source").get<std::string>());
    pred.strategy.kplane_inverse = s.value("kplane_inverse", false);
    pred.mixture_pi = vec_from_json(j.at("mixture_pi"));
    if (!j.at("predictor").is_null()) pred.predictor = label_predictor_from_json(j.at("predictor"));
    return pred;
}

nlohmann::json ensemble_to_json(const EnsemblePredictor& ens) {
    json j;
    j["format"] = "clr-ensemble";
    j["version"] = 1;
    json members = json::array();
    for (const auto& m : ens.members) members.push_back(predictor_to_json(m));
    j["members"] = std::move(members);
    return j;
}

EnsemblePredictor ensemble_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "clr-ensemble") throw ParseError("not an ensemble document");
    EnsemblePredictor ens;
    for (const auto& m : j.at("members")) ens.members.push_back(predictor_from_json(m));
    return ens;
}

}  // namespace clr
