#include "clr/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace clr {

ClassifierSpec::Kind classifier_kind_from_string(const std::string& s) {
    if (s == "logistic") return ClassifierSpec::Kind::logistic;
    if (s == "forest" || s == "random_forest") return ClassifierSpec::Kind::random_forest;
    throw InvalidSpec("unknown classifier kind: " + s);
}

std::string to_string(ClassifierSpec::Kind kind) {
    return kind == ClassifierSpec::Kind::logistic ? "logistic" : "forest";
}

const TreeNode& DecisionTree::walk(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int at = 0;
    while (nodes[static_cast<size_t>(at)].feature >= 0) {
        const TreeNode& nd = nodes[static_cast<size_t>(at)];
        at = (x[nd.feature] <= nd.threshold) ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(at)];
}

namespace {

// one CART builder for Gini classification (n_classes > 0) and
// variance-reduction regression (n_classes == 0)
struct TreeBuilder {
    const Matd& X;
    const Vecd& y;          // class index as double, or regression target
    int n_classes;
    int max_depth;
    int min_samples_split;
    int min_samples_leaf;
    int max_features;
    std::mt19937_64 rng;

    std::vector<int> idx;       // work buffer, partitioned in place
    std::vector<int> scratch;   // sort buffer
    std::vector<int> features;  // feature sampling buffer
    std::vector<double> left_counts;
    std::vector<double> total_counts;
    DecisionTree tree;

    TreeBuilder(const Matd& X_, const Vecd& y_, int n_classes_, const ClassifierSpec::Forest& f)
        : X(X_), y(y_), n_classes(n_classes_), max_depth(f.max_depth),
          min_samples_split(f.min_samples_split), min_samples_leaf(f.min_samples_leaf),
          max_features(f.max_features), rng(0) {
        features.resize(static_cast<size_t>(X.cols()));
        std::iota(features.begin(), features.end(), 0);
        if (max_features <= 0)
            max_features = std::max(1, static_cast<int>(std::lround(std::sqrt(double(X.cols())))));
        max_features = std::min<int>(max_features, static_cast<int>(X.cols()));
        if (n_classes > 0) {
            left_counts.resize(static_cast<size_t>(n_classes));
            total_counts.resize(static_cast<size_t>(n_classes));
        }
    }

    Vecd leaf_value(int lo, int hi) const {
        if (n_classes > 0) {
            Vecd v = Vecd::Zero(n_classes);
            for (int t = lo; t < hi; ++t) v[static_cast<int>(y[idx[static_cast<size_t>(t)]])] += 1.0;
            return v / v.sum();
        }
        double s = 0.0;
        for (int t = lo; t < hi; ++t) s += y[idx[static_cast<size_t>(t)]];
        Vecd v(1);
        v[0] = s / static_cast<double>(hi - lo);
        return v;
    }

    bool pure(int lo, int hi) const {
        const double first = y[idx[static_cast<size_t>(lo)]];
        for (int t = lo + 1; t < hi; ++t)
            if (y[idx[static_cast<size_t>(t)]] != first) return false;
        return true;
    }

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double score = std::numeric_limits<double>::infinity();
    };

    // weighted child impurity of splitting sorted values at position p (left = [0,p])
    Split best_split(int lo, int hi) {
        const int m = hi - lo;
        Split best;
        // sample features without replacement
        for (int t = 0; t < max_features; ++t) {
            std::uniform_int_distribution<int> pick(t, static_cast<int>(features.size()) - 1);
            std::swap(features[static_cast<size_t>(t)], features[static_cast<size_t>(pick(rng))]);
        }
        for (int fi = 0; fi < max_features; ++fi) {
            const int f = features[static_cast<size_t>(fi)];
            scratch.assign(idx.begin() + lo, idx.begin() + hi);
            std::sort(scratch.begin(), scratch.end(), [&](int a, int b) {
                const double va = X(a, f), vb = X(b, f);
                return va < vb || (va == vb && a < b);
            });
            if (X(scratch.front(), f) == X(scratch.back(), f)) continue;

            if (n_classes > 0) {
                std::fill(left_counts.begin(), left_counts.end(), 0.0);
                std::fill(total_counts.begin(), total_counts.end(), 0.0);
                for (int j : scratch) total_counts[static_cast<size_t>(y[j])] += 1.0;
                double left_sq = 0.0;
                double right_sq = 0.0;
                for (double c : total_counts) right_sq += c * c;
                for (int p = 0; p < m - 1; ++p) {
                    const int j = scratch[static_cast<size_t>(p)];
                    const auto cls = static_cast<size_t>(y[j]);
                    left_sq += 2.0 * left_counts[cls] + 1.0;
                    right_sq += -2.0 * (total_counts[cls] - left_counts[cls]) + 1.0;
                    left_counts[cls] += 1.0;
                    const int nl = p + 1, nr = m - nl;
                    if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
                    const double vl = X(j, f);
                    const double vr = X(scratch[static_cast<size_t>(p + 1)], f);
                    if (vl == vr) continue;
                    // weighted gini = nl(1 - left_sq/nl^2) + nr(1 - right_sq/nr^2)
                    const double score = m - left_sq / nl - right_sq / nr;
                    if (score < best.score) {
                        double mid = 0.5 * (vl + vr);
                        if (!(mid < vr)) mid = vl;
                        best = {f, mid, score};
                    }
                }
            } else {
                double right_sum = 0.0;
                for (int j : scratch) right_sum += y[j];
                double left_sum = 0.0;
                for (int p = 0; p < m - 1; ++p) {
                    const int j = scratch[static_cast<size_t>(p)];
                    left_sum += y[j];
                    right_sum -= y[j];
                    const int nl = p + 1, nr = m - nl;
                    if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
                    const double vl = X(j, f);
                    const double vr = X(scratch[static_cast<size_t>(p + 1)], f);
                    if (vl == vr) continue;
                    // minimizing child SSE = maximizing sum of squared child means
                    const double score = -(left_sum * left_sum / nl + right_sum * right_sum / nr);
                    if (score < best.score) {
                        double mid = 0.5 * (vl + vr);
                        if (!(mid < vr)) mid = vl;
                        best = {f, mid, score};
                    }
                }
            }
        }
        return best;
    }

    int build(int lo, int hi, int depth) {
        const int me = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const int m = hi - lo;
        const bool stop = m < min_samples_split || (max_depth >= 0 && depth >= max_depth) || pure(lo, hi);
        if (!stop) {
            Split sp = best_split(lo, hi);
            if (sp.feature >= 0) {
                auto mid_it = std::stable_partition(
                    idx.begin() + lo, idx.begin() + hi,
                    [&](int j) { return X(j, sp.feature) <= sp.threshold; });
                const int mid = static_cast<int>(mid_it - idx.begin());
                tree.nodes[static_cast<size_t>(me)].feature = sp.feature;
                tree.nodes[static_cast<size_t>(me)].threshold = sp.threshold;
                const int l = build(lo, mid, depth + 1);
                const int r = build(mid, hi, depth + 1);
                tree.nodes[static_cast<size_t>(me)].left = l;
                tree.nodes[static_cast<size_t>(me)].right = r;
                return me;
            }
        }
        tree.nodes[static_cast<size_t>(me)].value = leaf_value(lo, hi);
        return me;
    }
};

DecisionTree build_tree(const Matd& X, const Vecd& y, int n_classes,
                        const ClassifierSpec::Forest& spec, std::uint64_t tree_seed) {
    TreeBuilder b(X, y, n_classes, spec);
    b.rng.seed(tree_seed);
    const auto n = static_cast<int>(X.rows());
    b.idx.resize(static_cast<size_t>(n));
    if (spec.bootstrap) {
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (auto& j : b.idx) j = pick(b.rng);
    } else {
        std::iota(b.idx.begin(), b.idx.end(), 0);
    }
    b.build(0, n, 0);
    return std::move(b.tree);
}

Matd softmax_rows(const Matd& Z) {
    Vecd mx = Z.rowwise().maxCoeff();
    Matd E = (Z.colwise() - mx).array().exp().matrix();
    Vecd s = E.rowwise().sum();
    return (E.array().colwise() / s.array()).matrix();
}

LabelPredictor fit_logistic(const Matd& X, const VecXi& labels, int k,
                            const ClassifierSpec::Logistic& spec) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    Matd W = Matd::Zero(k, d);
    Vecd b = Vecd::Zero(k);
    Matd Y = Matd::Zero(n, k);
    for (Eigen::Index j = 0; j < n; ++j) Y(j, labels[j]) = 1.0;

    auto loss = [&](const Matd& Wc, const Vecd& bc) {
        Matd Z = (X * Wc.transpose()).rowwise() + bc.transpose();
        Vecd mx = Z.rowwise().maxCoeff();
        Vecd lse = (mx.array() + (Z.colwise() - mx).array().exp().rowwise().sum().log()).matrix();
        double ce = lse.sum();
        for (Eigen::Index j = 0; j < n; ++j) ce -= Z(j, labels[j]);
        return ce + 0.5 * spec.alpha * Wc.squaredNorm();
    };

    double f = loss(W, b);
    double step = 1.0;
    for (int epoch = 0; epoch < spec.max_epochs; ++epoch) {
        Matd Z = (X * W.transpose()).rowwise() + b.transpose();
        Matd G = softmax_rows(Z) - Y;  // n x k
        Matd gW = G.transpose() * X + spec.alpha * W;
        Vecd gb = G.colwise().sum().transpose();
        const double gnorm2 = gW.squaredNorm() + gb.squaredNorm();
        if (std::sqrt(gnorm2) <= spec.tol * static_cast<double>(n)) break;

        step = std::min(step * 2.0, 1e3);
        bool moved = false;
        for (int half = 0; half < 60; ++half) {
            Matd Wn = W - step * gW;
            Vecd bn = b - step * gb;
            const double fn = loss(Wn, bn);
            if (fn <= f - 1e-4 * step * gnorm2) {
                W = std::move(Wn);
                b = std::move(bn);
                f = fn;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }

    LabelPredictor p;
    p.kind = LabelPredictor::Kind::logistic;
    p.n_classes = k;
    p.W = std::move(W);
    p.bias = std::move(b);
    return p;
}

}  // namespace

LabelPredictor fit_classifier(const Matd& X, const Partition& labels, const ClassifierSpec& spec) {
    if (labels.labels.size() != X.rows())
        throw DimensionMismatch("fit_classifier: labels length != X rows");
    if (labels.k < 1) throw InvalidSpec("fit_classifier: partition has k < 1");
    const int k = labels.k;

    if (spec.kind == ClassifierSpec::Kind::logistic)
        return fit_logistic(X, labels.labels, k, spec.logistic);

    LabelPredictor p;
    p.kind = LabelPredictor::Kind::random_forest;
    p.n_classes = k;
    Vecd yd = labels.labels.cast<double>();
    p.trees.reserve(static_cast<size_t>(spec.forest.n_trees));
    for (int t = 0; t < spec.forest.n_trees; ++t)
        p.trees.push_back(build_tree(X, yd, k, spec.forest, mix_seed(spec.forest.seed, static_cast<std::uint64_t>(t))));
    return p;
}

LabelPredictor nearest_centroid_predictor(const Matd& centroids) {
    if (centroids.rows() < 1) throw InvalidSpec("nearest_centroid_predictor: no centroids");
    LabelPredictor p;
    p.kind = LabelPredictor::Kind::nearest_centroid;
    p.n_classes = static_cast<int>(centroids.rows());
    p.centroids = centroids;
    return p;
}

LabelPredictor constraint_lookup_predictor(std::unordered_map<std::string, int> group_label,
                                           int n_classes) {
    LabelPredictor p;
    p.kind = LabelPredictor::Kind::constraint_lookup;
    p.n_classes = n_classes;
    p.group_label = std::move(group_label);
    return p;
}

Matd predict_proba(const LabelPredictor& pred, const Matd& X,
                   const std::vector<std::string>* groups) {
    const Eigen::Index m = X.rows();
    const int k = pred.n_classes;
    switch (pred.kind) {
        case LabelPredictor::Kind::logistic: {
            if (X.cols() != pred.W.cols()) throw DimensionMismatch("predict_proba: feature mismatch");
            return softmax_rows((X * pred.W.transpose()).rowwise() + pred.bias.transpose());
        }
        case LabelPredictor::Kind::random_forest: {
            Matd acc = Matd::Zero(m, k);
            for (const auto& tree : pred.trees)
                for (Eigen::Index j = 0; j < m; ++j)
                    acc.row(j) += tree.walk(X.row(j)).value.transpose();
            return acc / static_cast<double>(pred.trees.size());
        }
        case LabelPredictor::Kind::nearest_centroid: {
            if (X.cols() != pred.centroids.cols())
                throw DimensionMismatch("predict_proba: feature mismatch");
            Matd out = Matd::Zero(m, k);
            for (Eigen::Index j = 0; j < m; ++j) {
                int best = 0;
                double best_d = (X.row(j) - pred.centroids.row(0)).squaredNorm();
                for (int i = 1; i < k; ++i) {
                    const double di = (X.row(j) - pred.centroids.row(i)).squaredNorm();
                    if (di < best_d) { best_d = di; best = i; }
                }
                out(j, best) = 1.0;
            }
            return out;
        }
        case LabelPredictor::Kind::constraint_lookup: {
            if (!groups) throw InvalidSpec("constraint_lookup predictor needs group tokens");
            if (static_cast<Eigen::Index>(groups->size()) != m)
                throw DimensionMismatch("predict_proba: groups length != X rows");
            Matd out = Matd::Zero(m, k);
            for (Eigen::Index j = 0; j < m; ++j) {
                auto it = pred.group_label.find((*groups)[static_cast<size_t>(j)]);
                if (it == pred.group_label.end())
                    throw InvalidSpec("constraint_lookup: unseen group token " +
                                      (*groups)[static_cast<size_t>(j)]);
                out(j, it->second) = 1.0;
            }
            return out;
        }
    }
    throw InvalidSpec("predict_proba: bad predictor kind");
}

VecXi predict_label(const LabelPredictor& pred, const Matd& X,
                    const std::vector<std::string>* groups) {
    Matd proba = predict_proba(pred, X, groups);
    VecXi out(proba.rows());
    for (Eigen::Index j = 0; j < proba.rows(); ++j) {
        int best = 0;
        for (int i = 1; i < proba.cols(); ++i)
            if (proba(j, i) > proba(j, best)) best = i;
        out[j] = best;
    }
    return out;
}

std::optional<int> lookup_group_label(const LabelPredictor& pred, const std::string& token) {
    auto it = pred.group_label.find(token);
    if (it == pred.group_label.end()) return std::nullopt;
    return it->second;
}

Vecd ForestRegressor::predict(const Matd& X) const {
    Vecd out(X.rows());
    for (Eigen::Index j = 0; j < X.rows(); ++j) {
        double s = 0.0;
        for (const auto& tree : trees) s += tree.walk(X.row(j)).value[0];
        out[j] = s / static_cast<double>(trees.size());
    }
    return out;
}

ForestRegressor fit_forest_regressor(const Matd& X, const Vecd& y,
                                     const ClassifierSpec::Forest& spec) {
    if (y.size() != X.rows()) throw DimensionMismatch("fit_forest_regressor: shape mismatch");
    ForestRegressor fr;
    fr.trees.reserve(static_cast<size_t>(spec.n_trees));
    for (int t = 0; t < spec.n_trees; ++t)
        fr.trees.push_back(build_tree(X, y, 0, spec, mix_seed(spec.seed, static_cast<std::uint64_t>(t))));
    return fr;
}

}  // namespace clr
