#pragma once

#include "vcsel/kernel.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vcsel {

struct FitConfig {
    KernelSpec kernel;
    std::optional<double> tau0;     // fixed tau0; otherwise chosen by GCV over tau0_grid
    std::vector<double> tau0_grid;  // empty = default log grid
    std::optional<double> M;        // budget on sum(theta)
    std::optional<double> lambda;   // penalty on sum ||beta_j||; used when M is absent
    double jitter = 1e-10;
    double cd_tol = 1e-9;
    int cd_max_iter = 100000;
    double bisect_tol = 1e-10;
    double selection_rel_eps = 1e-8;
};

/// 15 log-spaced points on [1e-6, 1e2].
std::vector<double> default_tau0_grid();

/// Result of a fit, self-contained for prediction: the kernel, the knots
/// (training visit times and covariate values) and the shared dual vector.
///
/// beta_j(t) = theta_j sum_a u_a x_{aj} K(t_a, t), and b is the intercept.
struct FittedModel {
    KernelSpec kernel;
    std::vector<std::string> covariate_names;
    double b = 0.0;
    Eigen::VectorXd theta;      // p
    Eigen::VectorXd u;          // N
    Eigen::VectorXd knot_times; // N
    Eigen::MatrixXd knot_x;     // p x N
    std::vector<std::size_t> selected;
    double tau0 = 0.0;
    double tau1 = 0.0;          // realized multiplier / N
    double time_divisor = 1.0;
    FitConfig config;

    std::size_t p() const { return static_cast<std::size_t>(theta.size()); }
    double intercept() const { return b; }
    bool is_selected(std::size_t j) const;

    /// beta_j(t); zero for unselected components.
    double coefficient(std::size_t j, double t) const;
    /// ||beta_j||_{H_K}
    Eigen::VectorXd component_norms() const;
};

inline constexpr int kModelFormatVersion = 1;

void write_model(const FittedModel& model, std::ostream& out);
void write_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel read_model(std::istream& in);
FittedModel read_model(const std::filesystem::path& path);

}  // namespace vcsel
