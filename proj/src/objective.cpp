#include "vcsel/solver.hpp"

#include "vcsel/error.hpp"

#include <cmath>

namespace vcsel {

namespace {

void check_coeffs(const GramBlocks& blocks, std::span<const Eigen::VectorXd> coeffs) {
    if (static_cast<Eigen::Index>(coeffs.size()) != blocks.p())
        throw ValidationError("expected " + std::to_string(blocks.p()) + " coefficient blocks, got " +
                              std::to_string(coeffs.size()));
    for (const auto& c : coeffs)
        if (c.size() != blocks.N()) throw ValidationError("coefficient block length does not match N");
}

}  // namespace

Eigen::VectorXd component_norms(const GramBlocks& blocks, std::span<const Eigen::VectorXd> coeffs) {
    check_coeffs(blocks, coeffs);
    Eigen::VectorXd norms(blocks.p());
    for (Eigen::Index j = 0; j < blocks.p(); ++j)
        norms(j) = std::sqrt(std::max(0.0, blocks.sigma_quad(j, coeffs[static_cast<std::size_t>(j)])));
    return norms;
}

double mean_squared_residual(const Eigen::VectorXd& y, const GramBlocks& blocks, double b,
                             std::span<const Eigen::VectorXd> coeffs) {
    check_coeffs(blocks, coeffs);
    if (y.size() != blocks.N()) throw ValidationError("response length does not match N");
    Eigen::VectorXd r = y.array() - b;
    for (Eigen::Index j = 0; j < blocks.p(); ++j) {
        const auto& c = coeffs[static_cast<std::size_t>(j)];
        if (c.isZero(0.0)) continue;
        r -= blocks.sigma_times(j, c);
    }
    return r.squaredNorm() / static_cast<double>(y.size());
}

double objective_primal(const LongitudinalDataset& ds, const GramBlocks& blocks, double b,
                        std::span<const Eigen::VectorXd> coeffs, double lambda) {
    const double loss = mean_squared_residual(ds.responses(), blocks, b, coeffs);
    return loss + lambda * component_norms(blocks, coeffs).sum();
}

double objective_aux(const LongitudinalDataset& ds, const GramBlocks& blocks, const Eigen::VectorXd& theta,
                     double b, std::span<const Eigen::VectorXd> coeffs, double tau0, double tau1) {
    if (theta.size() != blocks.p()) throw ValidationError("theta length does not match p");
    const double loss = mean_squared_residual(ds.responses(), blocks, b, coeffs);
    const Eigen::VectorXd norms = component_norms(blocks, coeffs);
    double penalty = 0.0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        if (theta(j) < 0.0) throw ValidationError("objective_aux: negative theta");
        if (theta(j) == 0.0) {
            if (norms(j) > 0.0)
                throw ValidationError("objective_aux: theta_" + std::to_string(j) +
                                      " = 0 with a nonzero component (objective is +inf)");
            continue;
        }
        penalty += tau0 * norms(j) * norms(j) / theta(j) + tau1 * theta(j);
    }
    return loss + penalty;
}

Eigen::VectorXd theta_from_beta(const Eigen::VectorXd& norms, double tau0, double tau1) {
    if (!(tau0 > 0.0 && tau1 > 0.0)) throw ValidationError("theta_from_beta: tau0 and tau1 must be positive");
    if ((norms.array() < 0.0).any()) throw ValidationError("theta_from_beta: negative norm");
    return std::sqrt(tau0 / tau1) * norms;
}

}  // namespace vcsel
