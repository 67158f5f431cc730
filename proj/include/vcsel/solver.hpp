#pragma once

#include "vcsel/dataset.hpp"
#include "vcsel/kernel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace vcsel {

/// Per-component dual coefficients c^j against the knot set, so that
/// beta_j(t) = sum_a c^j_a x_{aj} K(t_a, t) and ||beta_j||^2 = c^j' Sigma_j c^j.
using ComponentCoefficients = std::vector<Eigen::VectorXd>;

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

/// (1/N) sum (y - b - sum_j beta_j(t) x_j)^2 + lambda sum_j ||beta_j||
double objective_primal(const LongitudinalDataset& ds, const GramBlocks& blocks, double b,
                        std::span<const Eigen::VectorXd> coeffs, double lambda);

/// (1/N) sum (...)^2 + tau0 sum_j ||beta_j||^2 / theta_j + tau1 sum_j theta_j, with 0/0 = 0.
/// Throws ValidationError when theta_j = 0 but beta_j != 0 (the objective is +inf there).
double objective_aux(const LongitudinalDataset& ds, const GramBlocks& blocks, const Eigen::VectorXd& theta,
                     double b, std::span<const Eigen::VectorXd> coeffs, double tau0, double tau1);

/// Squared-error part shared by both objectives.
double mean_squared_residual(const Eigen::VectorXd& y, const GramBlocks& blocks, double b,
                             std::span<const Eigen::VectorXd> coeffs);

/// sqrt(c^j' Sigma_j c^j) for each component.
Eigen::VectorXd component_norms(const GramBlocks& blocks, std::span<const Eigen::VectorXd> coeffs);

/// Penalty weight on sum_j ||beta_j|| at which the theta-weighted objective,
/// minimized over theta, coincides with the primal one: 2 sqrt(tau0 tau1).
inline double lambda_from_taus(double tau0, double tau1) { return 2.0 * std::sqrt(tau0 * tau1); }
inline double tau1_from_lambda(double lambda, double tau0) { return lambda * lambda / (4.0 * tau0); }

/// theta_j = sqrt(tau0 / tau1) ||beta_j||
Eigen::VectorXd theta_from_beta(const Eigen::VectorXd& norms, double tau0, double tau1);

// ---------------------------------------------------------------------------
// Fixed-theta solves
// ---------------------------------------------------------------------------

struct FixedThetaSolution {
    double b = 0.0;
    Eigen::VectorXd u;      // shared dual vector, length N
    Eigen::VectorXd theta;  // length p
    std::optional<ComponentCoefficients> c_blocks;  // literal solve only
    Eigen::VectorXd component_norms;                // ||beta_j||
    Eigen::VectorXd fitted;                         // b + sum_j Sigma_j c^j

    /// c^j, either the literal blocks or theta_j u.
    ComponentCoefficients coefficients() const;
};

/// Reduced O(N^3) solve: (K_theta + N tau0 I) u = y - b 1 with 1'u = 0, c^j = theta_j u.
FixedThetaSolution solve_fixed_theta_reduced(const LongitudinalDataset& ds, const GramBlocks& blocks,
                                             const Eigen::VectorXd& theta, double tau0, double jitter = 1e-10);

/// Same solve for an arbitrary response vector (used to assemble hat matrices).
FixedThetaSolution solve_fixed_theta_reduced(const GramBlocks& blocks, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& theta, double tau0, double jitter = 1e-10);

/// Literal (Np)x(Np) closed form with Sigma~ = Sigma'Sigma + N diag(tau0/theta_j Sigma_j).
/// Components with theta_j = 0 are dropped first; guarded to N p <= 5000.
FixedThetaSolution solve_fixed_theta_literal(const LongitudinalDataset& ds, const GramBlocks& blocks,
                                             const Eigen::VectorXd& theta, double tau0);

/// Gradient of (1/N)||y - b1 - sum_j theta_j Sigma_j c'^j||^2 + tau0 sum_j theta_j c'^j' Sigma_j c'^j
/// at c'^j = c^j / theta_j, stacked as (d/db, d/dc'^1, ..., d/dc'^p).
Eigen::VectorXd fixed_theta_gradient(const LongitudinalDataset& ds, const GramBlocks& blocks,
                                     const FixedThetaSolution& sol, double tau0);

// ---------------------------------------------------------------------------
// Theta step
// ---------------------------------------------------------------------------

struct ThetaStepOptions {
    double cd_tol = 1e-9;       // relative KKT tolerance for coordinate descent
    int cd_max_iter = 100000;   // sweeps
    double bisect_tol = 1e-10;  // relative tolerance on sum(theta) - M
};

struct ThetaStepResult {
    Eigen::VectorXd theta;
    double b = 0.0;
    double multiplier = 0.0;  // mu on sum(theta) in the N-scaled objective; tau1 = mu / N
    double kkt_residual = 0.0;
    double kkt_scale = 1.0;
    int sweeps = 0;
    bool budget_active = false;
};

/// min ||y - G theta - b 1||^2 + N tau0 d' theta  s.t. theta >= 0, sum(theta) <= M.
/// Cyclic coordinate descent with clipping at zero, bisection on the budget multiplier.
ThetaStepResult solve_theta_step(const Eigen::VectorXd& y, const Eigen::MatrixXd& g, const Eigen::VectorXd& d,
                                 double tau0, double M, const ThetaStepOptions& opts = {});
ThetaStepResult solve_theta_step(const LongitudinalDataset& ds, const Eigen::MatrixXd& g, const Eigen::VectorXd& d,
                                 double tau0, double M, const ThetaStepOptions& opts = {});

/// Same objective with a fixed multiplier mu on sum(theta) and no budget.
ThetaStepResult solve_theta_step_penalized(const Eigen::VectorXd& y, const Eigen::MatrixXd& g,
                                           const Eigen::VectorXd& d, double tau0, double multiplier,
                                           const ThetaStepOptions& opts = {});

/// Lagrangian partial derivatives at (theta, multiplier), intercept profiled out.
Eigen::VectorXd theta_step_gradient(const Eigen::VectorXd& y, const Eigen::MatrixXd& g, const Eigen::VectorXd& d,
                                    double tau0, const Eigen::VectorXd& theta, double multiplier);

/// Columns Sigma_j u and scalars u' Sigma_j u feeding the theta step.
void theta_step_inputs(const GramBlocks& blocks, const Eigen::VectorXd& u, Eigen::MatrixXd& g, Eigen::VectorXd& d);

}  // namespace vcsel
