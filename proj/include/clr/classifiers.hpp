#pragma once

#include <optional>
#include <unordered_map>

#include "clr/types.hpp"

namespace clr {

struct ClassifierSpec {
    enum class Kind { logistic, random_forest };
    Kind kind = Kind::logistic;

    struct Logistic {
        double alpha = 1.0;  // L2 penalty coefficient on the weight block
        int max_epochs = 2000;
        double tol = 1e-6;  // on gradient frobenius norm per sample
    } logistic;

    struct Forest {
        int n_trees = 20;
        int max_depth = -1;  // unlimited
        int min_samples_split = 2;
        int min_samples_leaf = 1;
        int max_features = -1;  // -1 means round(sqrt(d))
        bool bootstrap = true;
        std::uint64_t seed = 0;
    } forest;
};

ClassifierSpec::Kind classifier_kind_from_string(const std::string& s);
std::string to_string(ClassifierSpec::Kind kind);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    Vecd value;  // class distribution, or a single mean for regression trees
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    const TreeNode& walk(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

struct LabelPredictor {
    enum class Kind { logistic, random_forest, nearest_centroid, constraint_lookup };
    Kind kind = Kind::logistic;
    int n_classes = 0;

    Matd W;  // logistic, k x d
    Vecd bias;
    std::vector<DecisionTree> trees;
    Matd centroids;
    std::unordered_map<std::string, int> group_label;
};

LabelPredictor fit_classifier(const Matd& X, const Partition& labels, const ClassifierSpec& spec);
LabelPredictor nearest_centroid_predictor(const Matd& centroids);
LabelPredictor constraint_lookup_predictor(std::unordered_map<std::string, int> group_label,
                                           int n_classes);

// row-stochastic m x k; constraint_lookup predictors need `groups`
Matd predict_proba(const LabelPredictor& pred, const Matd& X,
                   const std::vector<std::string>* groups = nullptr);
VecXi predict_label(const LabelPredictor& pred, const Matd& X,
                    const std::vector<std::string>* groups = nullptr);

// label for one constraint token; empty when the group was never seen
std::optional<int> lookup_group_label(const LabelPredictor& pred, const std::string& token);

struct ForestRegressor {
    std::vector<DecisionTree> trees;
    Vecd predict(const Matd& X) const;
};

ForestRegressor fit_forest_regressor(const Matd& X, const Vecd& y, const ClassifierSpec::Forest& spec);

}  // namespace clr
