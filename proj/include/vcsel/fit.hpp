#pragma once

#include "vcsel/dataset.hpp"
#include "vcsel/kernel.hpp"
#include "vcsel/model.hpp"
#include "vcsel/solver.hpp"
#include "vcsel/tuning.hpp"

#include <array>
#include <string>
#include <vector>

namespace vcsel {

struct FitResult {
    FittedModel model;
    GcvTrace gcv;  // empty grid when tau0 was fixed
    FixedThetaSolution step2;
    ThetaStepResult step3;
    FixedThetaSolution step4;
    /// theta-weighted objective after steps 2, 3 and 4, with tau1 = multiplier / N.
    std::array<double, 3> aux_objective{};
    std::vector<std::string> warnings;
};

/// Steps 1-2 of the one-step schedule (theta = 1, GCV-tuned tau0, fixed-theta
/// solve) computed once; `finish` then runs steps 3-4 for any budget or
/// penalty. Cross-validation over M reuses one prepared fit per fold.
class OneStepFit {
public:
    OneStepFit(const LongitudinalDataset& ds, const FitConfig& config);

    FitResult finish_budget(double M) const;
    FitResult finish_lambda(double lambda) const;
    /// Uses config.M, else config.lambda.
    FitResult finish() const;

    double tau0() const { return tau0_; }
    const GcvTrace& gcv() const { return gcv_; }
    const GramBlocks& blocks() const { return blocks_; }

private:
    FitResult finish_with(const ThetaStepResult& step3) const;
    ThetaStepOptions theta_options() const;

    LongitudinalDataset ds_;
    FitConfig config_;
    GramBlocks blocks_;
    std::vector<Eigen::Index> usable_;  // covariates with x_j not identically zero
    std::vector<std::string> warnings_;
    GcvTrace gcv_;
    double tau0_ = 0.0;
    Eigen::VectorXd theta1_;
    FixedThetaSolution step2_;
    Eigen::MatrixXd g_;  // Sigma_j u over usable covariates
    Eigen::VectorXd d_;
};

/// Full one-step algorithm: theta = 1, tau0 by GCV, theta step, final solve.
FitResult fit_one_step(const LongitudinalDataset& ds, const FitConfig& config);

/// Alternates fixed-theta solves and penalized theta steps at a fixed
/// (tau0, tau1) until the theta-weighted objective stops decreasing.
struct AlternatingFit {
    Eigen::VectorXd theta;
    FixedThetaSolution solution;
    std::vector<double> objective;
    int iterations = 0;
};
AlternatingFit fit_alternating(const LongitudinalDataset& ds, const GramBlocks& blocks, double tau0, double tau1,
                               int max_iter = 1000, double rel_tol = 1e-13);

/// Model built from a fixed-theta solution on `ds`.
FittedModel make_model(const LongitudinalDataset& ds, const GramBlocks& blocks, const FixedThetaSolution& sol,
                       double tau0, double tau1, const FitConfig& config);

}  // namespace vcsel
