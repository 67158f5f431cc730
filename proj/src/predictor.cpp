#include "vcsel/predictor.hpp"

#include "vcsel/error.hpp"

#include <algorithm>
#include <cmath>

namespace vcsel {

bool FittedModel::is_selected(std::size_t j) const {
    return std::find(selected.begin(), selected.end(), j) != selected.end();
}

double FittedModel::coefficient(std::size_t j, double t) const {
    if (j >= p()) throw ValidationError("covariate index out of range");
    if (!is_selected(j)) {
        if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("time outside [0,1]");
        return 0.0;
    }
    const auto jj = static_cast<Eigen::Index>(j);
    double s = 0.0;
    for (Eigen::Index a = 0; a < u.size(); ++a) {
        const double w = u(a) * knot_x(jj, a);
        if (w != 0.0) s += w * kernel_eval(kernel, knot_times(a), t);
    }
    return theta(jj) * s;
}

Eigen::VectorXd FittedModel::component_norms() const {
    const Eigen::MatrixXd g = gram_matrix(kernel, knot_times);
    Eigen::VectorXd norms = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        if (theta(j) == 0.0) continue;
        const Eigen::VectorXd w = knot_x.row(j).transpose().cwiseProduct(u);
        norms(j) = theta(j) * std::sqrt(std::max(0.0, w.dot(g * w)));
    }
    return norms;
}

Eigen::VectorXd coefficient_curve(const FittedModel& model, std::size_t j, const Eigen::VectorXd& times) {
    if (j >= model.p()) throw ValidationError("covariate index out of range");
    Eigen::VectorXd out(times.size());
    for (Eigen::Index k = 0; k < times.size(); ++k) out(k) = model.coefficient(j, times(k));
    return out;
}

double predict_subject(const FittedModel& model, const std::map<std::string, double>& new_x, double t) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.p()));
    for (auto j : model.selected) {
        auto it = new_x.find(model.covariate_names[j]);
        if (it == new_x.end())
            throw ValidationError("missing value for selected covariate '" + model.covariate_names[j] + "'");
        x(static_cast<Eigen::Index>(j)) = it->second;
    }
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("time outside [0,1]");
    return predict_at(model, x, t);
}

bool beyond_training_range(const FittedModel& model, double t) {
    return model.knot_times.size() > 0 && t > model.knot_times.maxCoeff();
}

Eigen::VectorXd predict_visits(const FittedModel& model, const LongitudinalDataset& ds) {
    // model covariate j -> dataset column
    std::vector<std::pair<std::size_t, std::size_t>> columns;
    for (auto j : model.selected) {
        const auto& names = ds.covariate_names();
        auto it = std::find(names.begin(), names.end(), model.covariate_names[j]);
        if (it == names.end())
            throw ValidationError("dataset lacks selected covariate '" + model.covariate_names[j] + "'");
        columns.emplace_back(j, static_cast<std::size_t>(it - names.begin()));
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(ds.N()));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.p()));
    Eigen::Index a = 0;
    for (const auto& s : ds.subjects()) {
        for (const auto& v : s.visits) {
            for (auto [j, col] : columns) {
                if (!v.covariates[col])
                    throw ValidationError("subject '" + s.id + "' is missing selected covariate '" +
                                          model.covariate_names[j] + "'");
                x(static_cast<Eigen::Index>(j)) = *v.covariates[col];
            }
            out(a++) = predict_at(model, x, v.time);
        }
    }
    return out;
}

PredictionMetrics evaluate_predictions(const FittedModel& model, const LongitudinalDataset& holdout) {
    if (holdout.N() == 0) throw ValidationError("empty holdout");
    const Eigen::VectorXd pred = predict_visits(model, holdout);
    const Eigen::VectorXd err = holdout.responses() - pred;
    PredictionMetrics m;
    m.squared_errors = err.array().square();
    m.rmse = std::sqrt(m.squared_errors.mean());
    m.mae = err.cwiseAbs().mean();
    Eigen::Index a = 0;
    for (const auto& s : holdout.subjects()) {
        const auto len = static_cast<Eigen::Index>(s.visits.size());
        m.subject_rmse.emplace_back(s.id, std::sqrt(m.squared_errors.segment(a, len).mean()));
        a += len;
    }
    return m;
}

}  // namespace vcsel
