#include "vcsel/solver.hpp"

#include "vcsel/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace vcsel {

ComponentCoefficients FixedThetaSolution::coefficients() const {
    if (c_blocks) return *c_blocks;
    ComponentCoefficients out;
    out.reserve(static_cast<std::size_t>(theta.size()));
    for (Eigen::Index j = 0; j < theta.size(); ++j) out.push_back(theta(j) * u);
    return out;
}

namespace {

void check_inputs(const LongitudinalDataset& ds, const GramBlocks& blocks, const Eigen::VectorXd& theta,
                  double tau0) {
    if (static_cast<Eigen::Index>(ds.N()) != blocks.N()) throw ValidationError("blocks were built for another dataset");
    if (theta.size() != blocks.p()) throw ValidationError("theta length does not match p");
    if ((theta.array() < 0.0).any()) throw ValidationError("theta must be nonnegative");
    if (!(tau0 > 0.0)) throw ValidationError("tau0 must be positive");
}

}  // namespace

FixedThetaSolution solve_fixed_theta_reduced(const LongitudinalDataset& ds, const GramBlocks& blocks,
                                             const Eigen::VectorXd& theta, double tau0, double jitter) {
    check_inputs(ds, blocks, theta, tau0);
    return solve_fixed_theta_reduced(blocks, ds.responses(), theta, tau0, jitter);
}

FixedThetaSolution solve_fixed_theta_reduced(const GramBlocks& blocks, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& theta, double tau0, double jitter) {
    if (y.size() != blocks.N()) throw ValidationError("response length does not match N");
    if (theta.size() != blocks.p()) throw ValidationError("theta length does not match p");
    if ((theta.array() < 0.0).any()) throw ValidationError("theta must be nonnegative");
    if (!(tau0 > 0.0)) throw ValidationError("tau0 must be positive");
    const Eigen::Index n = blocks.N();
    const double nd = static_cast<double>(n);

    const Eigen::MatrixXd k = blocks.aggregate(theta);
    Eigen::MatrixXd a = k;
    a.diagonal().array() += nd * tau0;

    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        a.diagonal().array() += jitter_amount(a, jitter);
        llt.compute(a);
        if (llt.info() != Eigen::Success)
            throw NumericError("fixed-theta solve: bordered system is not positive definite after jitter");
    }

    Eigen::MatrixXd rhs(n, 2);
    rhs.col(0).setOnes();
    rhs.col(1) = y;
    const Eigen::MatrixXd v = llt.solve(rhs);
    const double denom = v.col(0).sum();
    if (!(denom > 0.0) || !std::isfinite(denom)) throw NumericError("fixed-theta solve: singular intercept pivot");

    FixedThetaSolution sol;
    sol.b = v.col(1).sum() / denom;
    sol.u = v.col(1) - sol.b * v.col(0);
    sol.theta = theta;
    sol.fitted = (k * sol.u).array() + sol.b;
    sol.component_norms.resize(blocks.p());
    for (Eigen::Index j = 0; j < blocks.p(); ++j)
        sol.component_norms(j) = theta(j) == 0.0 ? 0.0 : theta(j) * std::sqrt(std::max(0.0, blocks.sigma_quad(j, sol.u)));
    return sol;
}

FixedThetaSolution solve_fixed_theta_literal(const LongitudinalDataset& ds, const GramBlocks& blocks,
                                             const Eigen::VectorXd& theta, double tau0) {
    check_inputs(ds, blocks, theta, tau0);
    const Eigen::Index n = blocks.N();
    const double nd = static_cast<double>(n);
    const Eigen::VectorXd y = ds.responses();

    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < theta.size(); ++j)
        if (theta(j) > 0.0) kept.push_back(j);
    const Eigen::Index q = static_cast<Eigen::Index>(kept.size());
    if (n * q > 5000) throw ValidationError("literal solve limited to N*p <= 5000");

    FixedThetaSolution sol;
    sol.theta = theta;
    sol.u = Eigen::VectorXd::Zero(n);
    ComponentCoefficients c(static_cast<std::size_t>(blocks.p()), Eigen::VectorXd::Zero(n));
    if (q == 0) {
        sol.b = y.mean();
        sol.fitted = Eigen::VectorXd::Constant(n, sol.b);
        sol.component_norms = Eigen::VectorXd::Zero(blocks.p());
        sol.c_blocks = std::move(c);
        return sol;
    }

    // Sigma = [Sigma_1 ... Sigma_q], N x Nq
    Eigen::MatrixXd sigma(n, n * q);
    for (Eigen::Index k = 0; k < q; ++k) sigma.middleCols(k * n, n) = blocks.sigma(kept[static_cast<std::size_t>(k)]);

    Eigen::MatrixXd tilde = sigma.transpose() * sigma;
    for (Eigen::Index k = 0; k < q; ++k) {
        const Eigen::Index j = kept[static_cast<std::size_t>(k)];
        tilde.block(k * n, k * n, n, n) += nd * (tau0 / theta(j)) * sigma.middleCols(k * n, n);
    }

    // Sigma~ is PSD and singular whenever some Sigma_j is; Sigma' v always lies in
    // its range, so the pseudo-inverse yields an exact solution of the normal equations.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(tilde);
    if (eig.info() != Eigen::Success) throw NumericError("literal solve: eigendecomposition failed");
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double cutoff = lam.cwiseAbs().maxCoeff() * static_cast<double>(n * q) * std::numeric_limits<double>::epsilon();
    Eigen::VectorXd inv_lam(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) inv_lam(i) = lam(i) > cutoff ? 1.0 / lam(i) : 0.0;

    Eigen::MatrixXd rhs(n, 2);
    rhs.col(0).setOnes();
    rhs.col(1) = y;
    const Eigen::MatrixXd st_rhs = sigma.transpose() * rhs;
    const Eigen::MatrixXd z = eig.eigenvectors() * (inv_lam.asDiagonal() * (eig.eigenvectors().transpose() * st_rhs));
    const Eigen::MatrixXd hz = sigma * z;  // [H 1, H y]

    const double denom = static_cast<double>(n) - hz.col(0).sum();
    if (!(denom > 0.0)) throw NumericError("literal solve: 1'(I - H)1 is not positive; smoother saturated");
    sol.b = (y.sum() - hz.col(1).sum()) / denom;
    const Eigen::VectorXd chat = z.col(1) - sol.b * z.col(0);

    sol.fitted = Eigen::VectorXd::Constant(n, sol.b);
    for (Eigen::Index k = 0; k < q; ++k) {
        const Eigen::Index j = kept[static_cast<std::size_t>(k)];
        c[static_cast<std::size_t>(j)] = chat.segment(k * n, n);
    }
    for (Eigen::Index j = 0; j < blocks.p(); ++j)
        if (theta(j) > 0.0) sol.fitted += blocks.sigma_times(j, c[static_cast<std::size_t>(j)]);
    sol.component_norms = component_norms(blocks, c);
    sol.c_blocks = std::move(c);
    return sol;
}

Eigen::VectorXd fixed_theta_gradient(const LongitudinalDataset& ds, const GramBlocks& blocks,
                                     const FixedThetaSolution& sol, double tau0) {
    const Eigen::Index n = blocks.N();
    const double nd = static_cast<double>(n);
    const auto coeffs = sol.coefficients();
    Eigen::VectorXd r = ds.responses().array() - sol.b;
    for (Eigen::Index j = 0; j < blocks.p(); ++j)
        if (sol.theta(j) > 0.0) r -= blocks.sigma_times(j, coeffs[static_cast<std::size_t>(j)]);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(1 + n * blocks.p());
    grad(0) = -2.0 / nd * r.sum();
    for (Eigen::Index j = 0; j < blocks.p(); ++j) {
        const double th = sol.theta(j);
        if (th <= 0.0) continue;
        const Eigen::VectorXd cprime = coeffs[static_cast<std::size_t>(j)] / th;
        grad.segment(1 + j * n, n) = 2.0 * th * blocks.sigma_times(j, -r / nd + tau0 * cprime);
    }
    return grad;
}

}  // namespace vcsel
