#pragma once

#include "vcsel/dataset.hpp"
#include "vcsel/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace vcsel {

enum class KernelFamily { Sobolev1, CubicSpline, Gaussian };

struct KernelSpec {
    KernelFamily family = KernelFamily::Sobolev1;
    double bandwidth = 0.1;  // gaussian only

    void validate() const {
        if (family == KernelFamily::Gaussian && !(bandwidth > 0.0))
            throw ValidationError("gaussian kernel needs a positive bandwidth");
    }
};

KernelFamily parse_kernel_family(const std::string& name);
std::string to_string(KernelFamily family);

/// Reproducing kernels on [0,1].
///
///  - sobolev1:     K(s,t) = 1 + min(s,t)
///  - cubic-spline: 1 + k1(s)k1(t) + k2(s)k2(t) - k4(|s-t|), scaled Bernoulli polynomials
///  - gaussian:     exp(-(s-t)^2 / (2 h^2))
template <typename Scalar>
Scalar kernel_eval(const KernelSpec& spec, Scalar s, Scalar t) {
    if (!(s >= Scalar(0) && s <= Scalar(1) && t >= Scalar(0) && t <= Scalar(1)))
        throw ValidationError("kernel argument outside [0,1]");
    switch (spec.family) {
        case KernelFamily::Sobolev1: return Scalar(1) + std::min(s, t);
        case KernelFamily::CubicSpline: {
            auto k1 = [](Scalar x) { return x - Scalar(0.5); };
            auto k2 = [&](Scalar x) { return (k1(x) * k1(x) - Scalar(1) / Scalar(12)) / Scalar(2); };
            auto k4 = [&](Scalar x) {
                const Scalar a = k1(x) * k1(x);
                return (a * a - a / Scalar(2) + Scalar(7) / Scalar(240)) / Scalar(24);
            };
            using std::abs;
            return Scalar(1) + k1(s) * k1(t) + k2(s) * k2(t) - k4(abs(s - t));
        }
        case KernelFamily::Gaussian: {
            const Scalar d = s - t;
            const Scalar h = Scalar(spec.bandwidth);
            using std::exp;
            return exp(-d * d / (Scalar(2) * h * h));
        }
    }
    return Scalar(0);
}

/// K(times_a, times_b) for every pair.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>
cross_gram(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& rows, const Eigen::MatrixBase<DerivedB>& cols) {
    using Scalar = typename DerivedA::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k(rows.size(), cols.size());
    for (Eigen::Index b = 0; b < cols.size(); ++b)
        for (Eigen::Index a = 0; a < rows.size(); ++a) k(a, b) = kernel_eval<Scalar>(spec, rows(a), cols(b));
    return k;
}

/// Symmetric Gram matrix over a vector of times; only the lower triangle is evaluated.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
gram_matrix(const KernelSpec& spec, const Eigen::MatrixBase<Derived>& times) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = times.size();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> g(n, n);
    for (Eigen::Index b = 0; b < n; ++b) {
        for (Eigen::Index a = b; a < n; ++a) {
            g(a, b) = kernel_eval<Scalar>(spec, times(a), times(b));
            g(b, a) = g(a, b);
        }
    }
    return g;
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const LongitudinalDataset& ds);

/// Sigma_j = D_j G D_j with D_j = diag(x_j).
template <typename DerivedG, typename DerivedX>
Eigen::Matrix<typename DerivedG::Scalar, Eigen::Dynamic, Eigen::Dynamic>
component_gram(const Eigen::MatrixBase<DerivedG>& gram, const Eigen::MatrixBase<DerivedX>& x) {
    if (gram.rows() != gram.cols() || gram.rows() != x.size())
        throw ValidationError("component_gram: dimension mismatch");
    return x.asDiagonal() * gram * x.asDiagonal();
}

/// K_theta = sum_j theta_j Sigma_j over an explicit list of component Grams.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
aggregate_kernel(std::span<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> sigma,
                 const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& theta) {
    if (static_cast<Eigen::Index>(sigma.size()) != theta.size())
        throw ValidationError("aggregate_kernel: theta length does not match the number of components");
    if ((theta.array() < Scalar(0)).any()) throw ValidationError("aggregate_kernel: negative theta entry");
    if (sigma.empty()) return {};
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(sigma[0].rows(), sigma[0].cols());
    for (std::size_t j = 0; j < sigma.size(); ++j)
        if (theta(static_cast<Eigen::Index>(j)) != Scalar(0)) k.noalias() += theta(static_cast<Eigen::Index>(j)) * sigma[j];
    return k;
}

struct VisitIndex {
    std::size_t subject;
    std::size_t visit;
};

/// Everything the solver needs about one dataset under one kernel.
///
/// Sigma_j is never stored: it is D_j G D_j with D_j = diag(design.col(j)),
/// so the aggregated kernel is the Hadamard product G .* (X diag(theta) X^T).
struct GramBlocks {
    KernelSpec kernel;
    Eigen::MatrixXd gram;    // N x N
    Eigen::MatrixXd design;  // N x p
    Eigen::VectorXd times;   // N
    std::vector<VisitIndex> visit_index;

    Eigen::Index N() const { return gram.rows(); }
    Eigen::Index p() const { return design.cols(); }

    Eigen::MatrixXd sigma(Eigen::Index j) const { return component_gram(gram, design.col(j)); }
    std::vector<Eigen::MatrixXd> sigma_all() const;

    /// sum_j theta_j Sigma_j
    Eigen::MatrixXd aggregate(const Eigen::VectorXd& theta) const;
    /// Sigma_j v
    Eigen::VectorXd sigma_times(Eigen::Index j, const Eigen::VectorXd& v) const;
    /// v^T Sigma_j v
    double sigma_quad(Eigen::Index j, const Eigen::VectorXd& v) const;
};

GramBlocks build_gram_blocks(const KernelSpec& spec, const LongitudinalDataset& ds);

/// Diagonal jitter used when a factorization of a PSD matrix fails.
inline double jitter_amount(const Eigen::MatrixXd& a, double rel = 1e-10) {
    return rel * a.trace() / static_cast<double>(std::max<Eigen::Index>(a.rows(), 1));
}

}  // namespace vcsel
