#include "vcsel/fit.hpp"

#include "vcsel/error.hpp"

#include <algorithm>
#include <limits>
#include <cmath>

namespace vcsel {

namespace {

std::vector<Eigen::Index> usable_covariates(const GramBlocks& blocks) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < blocks.p(); ++j)
        if (!blocks.design.col(j).isZero(0.0)) out.push_back(j);
    return out;
}

Eigen::VectorXd expand(const Eigen::VectorXd& sub, const std::vector<Eigen::Index>& idx, Eigen::Index p) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k < idx.size(); ++k) full(idx[k]) = sub(static_cast<Eigen::Index>(k));
    return full;
}

ComponentCoefficients scaled_copies(const Eigen::VectorXd& theta, const Eigen::VectorXd& u) {
    ComponentCoefficients c;
    for (Eigen::Index j = 0; j < theta.size(); ++j) c.push_back(theta(j) * u);
    return c;
}

}  // namespace

FittedModel make_model(const LongitudinalDataset& ds, const GramBlocks& blocks, const FixedThetaSolution& sol,
                       double tau0, double tau1, const FitConfig& config) {
    FittedModel m;
    m.kernel = blocks.kernel;
    m.covariate_names = ds.covariate_names();
    m.b = sol.b;
    m.theta = sol.theta;
    m.u = sol.u;
    m.knot_times = blocks.times;
    m.knot_x = blocks.design.transpose();
    for (Eigen::Index j = 0; j < sol.theta.size(); ++j)
        if (sol.theta(j) > 0.0) m.selected.push_back(static_cast<std::size_t>(j));
    m.tau0 = tau0;
    m.tau1 = tau1;
    m.time_divisor = ds.time_divisor();
    m.config = config;
    return m;
}

OneStepFit::OneStepFit(const LongitudinalDataset& ds, const FitConfig& config) : ds_(ds), config_(config) {
    config_.kernel.validate();
    blocks_ = build_gram_blocks(config_.kernel, ds_);
    usable_ = usable_covariates(blocks_);
    for (Eigen::Index j = 0; j < blocks_.p(); ++j)
        if (std::find(usable_.begin(), usable_.end(), j) == usable_.end())
            warnings_.push_back("covariate '" + ds_.covariate_names()[static_cast<std::size_t>(j)] +
                                "' is identically zero; component dropped");

    theta1_ = Eigen::VectorXd::Zero(blocks_.p());
    for (auto j : usable_) theta1_(j) = 1.0;

    if (config_.tau0) {
        if (!(*config_.tau0 > 0.0)) throw ValidationError("tau0 must be positive");
        tau0_ = *config_.tau0;
    } else {
        gcv_ = select_tau0(ds_, blocks_, config_.tau0_grid.empty() ? default_tau0_grid() : config_.tau0_grid);
        tau0_ = gcv_.chosen;
    }

    step2_ = solve_fixed_theta_reduced(ds_, blocks_, theta1_, tau0_, config_.jitter);

    Eigen::MatrixXd g_all;
    Eigen::VectorXd d_all;
    theta_step_inputs(blocks_, step2_.u, g_all, d_all);
    g_.resize(blocks_.N(), static_cast<Eigen::Index>(usable_.size()));
    d_.resize(static_cast<Eigen::Index>(usable_.size()));
    for (std::size_t k = 0; k < usable_.size(); ++k) {
        g_.col(static_cast<Eigen::Index>(k)) = g_all.col(usable_[k]);
        d_(static_cast<Eigen::Index>(k)) = d_all(usable_[k]);
    }
}

ThetaStepOptions OneStepFit::theta_options() const {
    return ThetaStepOptions{config_.cd_tol, config_.cd_max_iter, config_.bisect_tol};
}

FitResult OneStepFit::finish_budget(double M) const {
    if (!(M >= 0.0)) throw ValidationError("budget M must be nonnegative");
    return finish_with(solve_theta_step(ds_.responses(), g_, d_, tau0_, M, theta_options()));
}

FitResult OneStepFit::finish_lambda(double lambda) const {
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be nonnegative");
    const double mu = static_cast<double>(ds_.N()) * tau1_from_lambda(lambda, tau0_);
    return finish_with(solve_theta_step_penalized(ds_.responses(), g_, d_, tau0_, mu, theta_options()));
}

FitResult OneStepFit::finish() const {
    if (config_.M) return finish_budget(*config_.M);
    if (config_.lambda) return finish_lambda(*config_.lambda);
    throw ValidationError("fit needs either a budget M or a penalty lambda");
}

FitResult OneStepFit::finish_with(const ThetaStepResult& step3_sub) const {
    const Eigen::Index p = blocks_.p();
    FitResult res;
    res.gcv = gcv_;
    res.warnings = warnings_;
    res.step2 = step2_;
    res.step3 = step3_sub;
    res.step3.theta = expand(step3_sub.theta, usable_, p);

    const double tau1 = step3_sub.multiplier / static_cast<double>(ds_.N());
    res.aux_objective[0] = objective_aux(ds_, blocks_, theta1_, step2_.b, step2_.coefficients(), tau0_, tau1);
    res.aux_objective[1] =
        objective_aux(ds_, blocks_, res.step3.theta, res.step3.b, scaled_copies(res.step3.theta, step2_.u), tau0_, tau1);

    // Coordinate descent clips to exact zeros; bisection can leave dust.
    Eigen::VectorXd theta4 = res.step3.theta;
    const double eps = config_.selection_rel_eps * (theta4.size() ? theta4.maxCoeff() : 0.0);
    for (Eigen::Index j = 0; j < p; ++j)
        if (theta4(j) <= eps) theta4(j) = 0.0;

    res.step4 = solve_fixed_theta_reduced(ds_, blocks_, theta4, tau0_, config_.jitter);
    res.aux_objective[2] = objective_aux(ds_, blocks_, theta4, res.step4.b, res.step4.coefficients(), tau0_, tau1);
    res.model = make_model(ds_, blocks_, res.step4, tau0_, tau1, config_);
    return res;
}

FitResult fit_one_step(const LongitudinalDataset& ds, const FitConfig& config) {
    return OneStepFit(ds, config).finish();
}

AlternatingFit fit_alternating(const LongitudinalDataset& ds, const GramBlocks& blocks, double tau0, double tau1,
                               int max_iter, double rel_tol) {
    const Eigen::VectorXd y = ds.responses();
    const auto usable = usable_covariates(blocks);
    const double mu = static_cast<double>(ds.N()) * tau1;

    AlternatingFit out;
    out.theta = Eigen::VectorXd::Zero(blocks.p());
    for (auto j : usable) out.theta(j) = 1.0;

    Eigen::MatrixXd g_all, g(blocks.N(), static_cast<Eigen::Index>(usable.size()));
    Eigen::VectorXd d_all, d(static_cast<Eigen::Index>(usable.size()));
    double prev = std::numeric_limits<double>::infinity();
    for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
        const auto sol = solve_fixed_theta_reduced(ds, blocks, out.theta, tau0);
        theta_step_inputs(blocks, sol.u, g_all, d_all);
        for (std::size_t k = 0; k < usable.size(); ++k) {
            g.col(static_cast<Eigen::Index>(k)) = g_all.col(usable[k]);
            d(static_cast<Eigen::Index>(k)) = d_all(usable[k]);
        }
        const auto step = solve_theta_step_penalized(y, g, d, tau0, mu);
        out.theta = expand(step.theta, usable, blocks.p());
        const double obj = objective_aux(ds, blocks, out.theta, step.b, scaled_copies(out.theta, sol.u), tau0, tau1);
        out.objective.push_back(obj);
        if (std::abs(prev - obj) <= rel_tol * std::max(1.0, std::abs(obj))) break;
        prev = obj;
    }
    out.iterations = std::min(out.iterations, max_iter);
    out.solution = solve_fixed_theta_reduced(ds, blocks, out.theta, tau0);
    out.objective.push_back(
        objective_aux(ds, blocks, out.theta, out.solution.b, out.solution.coefficients(), tau0, tau1));
    return out;
}

}  // namespace vcsel
