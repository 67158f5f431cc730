#pragma once

#include "vcsel/dataset.hpp"
#include "vcsel/kernel.hpp"
#include "vcsel/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace vcsel {

/// Generalized cross-validation for the reduced fixed-theta smoother.
///
/// The eigendecomposition of K_theta is computed once; every tau0 then costs
/// O(N^2). With A = K_theta + N tau0 I and the intercept profiled out,
///   I - H = N tau0 A^{-1} (I - 1 w'),   w = A^{-1} 1 / (1' A^{-1} 1),
/// and the score is (||(I-H)y||^2 / N) / (tr(I-H) / N)^2.
class GcvEvaluator {
public:
    GcvEvaluator(const Eigen::VectorXd& y, const Eigen::MatrixXd& k_theta);

    struct Point {
        double score;
        double trace_hat;  // tr(H), the effective degrees of freedom
        double rss;        // ||(I-H) y||^2
        bool degenerate;
    };

    Point evaluate(double tau0) const;
    /// In-sample fitted values y_hat = H y.
    Eigen::VectorXd fitted(double tau0) const;

private:
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
    Eigen::VectorXd ones_proj_;  // V' 1
    Eigen::VectorXd y_proj_;     // V' y
    Eigen::VectorXd y_;
};

/// Relative size of tr(I-H)/N below which the smoother counts as saturated.
inline constexpr double kGcvSaturation = 1e-8;

/// Throws NumericError when tr(I - H) is not positive.
double gcv_score(const LongitudinalDataset& ds, const GramBlocks& blocks, const Eigen::VectorXd& theta, double tau0);

/// Hat matrix of the reduced solve, assembled column by column from N unit-vector solves.
Eigen::MatrixXd hat_matrix(const GramBlocks& blocks, const Eigen::VectorXd& theta, double tau0);

struct GcvTrace {
    std::vector<double> grid;
    std::vector<double> scores;  // +inf at degenerate points
    std::vector<double> edf;
    double chosen = 0.0;
    std::size_t chosen_index = 0;
};

/// Scores every grid value at theta = 1 (zero for degenerate covariates) and returns the argmin.
GcvTrace select_tau0(const LongitudinalDataset& ds, const GramBlocks& blocks, const std::vector<double>& grid);

void write_gcv_csv(const GcvTrace& trace, std::ostream& out);

struct CvPlan {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::vector<std::size_t> assignment;  // subject index -> fold

    std::vector<std::size_t> fold_members(std::size_t fold) const;
    std::vector<std::size_t> training_members(std::size_t fold) const;
};

/// Subject-level folds: a seeded shuffle dealt round-robin, so sizes differ by at most one.
CvPlan make_cv_plan(std::size_t n_subjects, std::size_t k, std::uint64_t seed);

struct CvCurve {
    std::vector<double> grid;
    std::vector<double> errors;                    // pooled held-out MSE per grid value
    std::vector<std::vector<double>> fold_errors;  // [grid][fold] held-out MSE
    double chosen = 0.0;
    std::size_t chosen_index = 0;
};

/// k-fold cross-validation of the budget M. Ties resolve to the smaller M.
CvCurve cross_validate_M(const LongitudinalDataset& ds, const FitConfig& config, const std::vector<double>& grid_M,
                         const CvPlan& plan, int jobs = 1);

/// {0, 0.5, ..., 2 min(p, 20)}
std::vector<double> default_M_grid(std::size_t p);

void write_cv_csv(const CvCurve& curve, std::ostream& out);

}  // namespace vcsel
