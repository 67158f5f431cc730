#pragma once

#include "vcsel/dataset.hpp"
#include "vcsel/model.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace vcsel {

/// beta_j evaluated at each time; identically zero for unselected j.
Eigen::VectorXd coefficient_curve(const FittedModel& model, std::size_t j, const Eigen::VectorXd& times);

/// b + sum_j beta_j(t) x_j for any model exposing p(), intercept() and coefficient(j, t).
/// Both fitted models and synthetic ground truth go through this.
template <typename Model, typename Derived>
double predict_at(const Model& model, const Eigen::MatrixBase<Derived>& x, double t) {
    double value = model.intercept();
    for (std::size_t j = 0; j < model.p(); ++j) {
        const double xj = x(static_cast<Eigen::Index>(j));
        if (xj != 0.0) value += model.coefficient(j, t) * xj;
    }
    return value;
}

/// Prediction for a new subject; `new_x` must hold every selected covariate by name.
double predict_subject(const FittedModel& model, const std::map<std::string, double>& new_x, double t);

/// True when t lies beyond the largest training time (the kernel extrapolates).
bool beyond_training_range(const FittedModel& model, double t);

/// Predictions for every visit of `ds`, matched to the model's covariates by name.
/// Only selected covariates must be present in `ds`.
Eigen::VectorXd predict_visits(const FittedModel& model, const LongitudinalDataset& ds);

struct PredictionMetrics {
    Eigen::VectorXd squared_errors;  // per visit, dataset order
    double rmse = 0.0;
    double mae = 0.0;
    std::vector<std::pair<std::string, double>> subject_rmse;
};

PredictionMetrics evaluate_predictions(const FittedModel& model, const LongitudinalDataset& holdout);

}  // namespace vcsel
