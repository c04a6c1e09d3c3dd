#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace clr {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matd = Mat<double>;
using Vecd = Vec<double>;
using VecXi = Eigen::VectorXi;

struct ClrError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : ClrError { using ClrError::ClrError; };
struct SingularSystem : ClrError { using ClrError::ClrError; };
struct ZeroVariance : ClrError { using ClrError::ClrError; };
struct EmptyGroup : ClrError { using ClrError::ClrError; };
struct InsufficientData : ClrError { using ClrError::ClrError; };
struct DegenerateColumn : ClrError { using ClrError::ClrError; };
struct UnknownRecipe : ClrError { using ClrError::ClrError; };
struct ParseError : ClrError { using ClrError::ClrError; };
struct MissingColumn : ClrError { using ClrError::ClrError; };
struct NonNumericTarget : ClrError { using ClrError::ClrError; };
struct InvalidSpec : ClrError { using ClrError::ClrError; };
struct FoldTooSmall : ClrError { using ClrError::ClrError; };
struct IoError : ClrError { using ClrError::ClrError; };

struct Dataset {
    Matd X;
    Vecd y;
    std::vector<std::string> constraint_ids;  // empty when absent

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }
    bool has_constraints() const { return !constraint_ids.empty(); }

    void validate() const {
        if (X.rows() < 1 || X.cols() < 1)
            throw DimensionMismatch("dataset needs n >= 1 and d >= 1");
        if (y.size() != X.rows())
            throw DimensionMismatch("X row count != y length");
        if (!constraint_ids.empty() &&
            static_cast<Eigen::Index>(constraint_ids.size()) != X.rows())
            throw DimensionMismatch("constraint_ids length != X row count");
        if (!X.allFinite() || !y.allFinite())
            throw DimensionMismatch("non-finite entries in dataset");
    }
};

struct LinearModel {
    Vecd w;
    double b = 0.0;
};

struct Partition {
    VecXi labels;
    int k = 0;  // clusters indexed [0,k); empty ones simply have no members

    std::vector<int> sizes() const {
        std::vector<int> s(static_cast<size_t>(k), 0);
        for (Eigen::Index j = 0; j < labels.size(); ++j) ++s[static_cast<size_t>(labels[j])];
        return s;
    }
};

// p(x) = Xw + b, expression-friendly
template <typename Derived>
Vecd predict_affine(const Eigen::MatrixBase<Derived>& X, const Vecd& w, double b) {
    if (X.cols() != w.size())
        throw DimensionMismatch("predict: X has " + std::to_string(X.cols()) +
                                " columns, model has " + std::to_string(w.size()));
    return ((X * w).array() + b).matrix();
}

inline Vecd predict_linear(const LinearModel& model, const Matd& X) {
    return predict_affine(X, model.w, model.b);
}

template <typename DerivedA, typename DerivedB>
double mse(const Eigen::MatrixBase<DerivedA>& y_true, const Eigen::MatrixBase<DerivedB>& y_pred) {
    if (y_true.size() != y_pred.size() || y_true.size() == 0)
        throw DimensionMismatch("mse: length mismatch or empty");
    return (y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size());
}

template <typename DerivedA, typename DerivedB>
double r2(const Eigen::MatrixBase<DerivedA>& y_true, const Eigen::MatrixBase<DerivedB>& y_pred) {
    if (y_true.size() != y_pred.size() || y_true.size() == 0)
        throw DimensionMismatch("r2: length mismatch or empty");
    const double mean = y_true.mean();
    const double sst = (y_true.array() - mean).square().sum();
    if (sst <= 0.0) throw ZeroVariance("r2: target has zero variance");
    const double sse = (y_true - y_pred).squaredNorm();
    return 1.0 - sse / sst;
}

// splitmix64, used to derive independent RNG streams
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace clr
