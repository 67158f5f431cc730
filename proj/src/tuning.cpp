#include "vcsel/tuning.hpp"

#include "vcsel/error.hpp"
#include "vcsel/fit.hpp"
#include "vcsel/numfmt.hpp"
#include "vcsel/parallel.hpp"
#include "vcsel/predictor.hpp"
#include "vcsel/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace vcsel {

GcvEvaluator::GcvEvaluator(const Eigen::VectorXd& y, const Eigen::MatrixXd& k_theta) : y_(y) {
    if (k_theta.rows() != y.size() || k_theta.cols() != y.size()) throw ValidationError("GCV: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k_theta);
    if (eig.info() != Eigen::Success) throw NumericError("GCV: eigendecomposition failed");
    eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
    eigenvectors_ = eig.eigenvectors();
    ones_proj_ = eigenvectors_.transpose() * Eigen::VectorXd::Ones(y.size());
    y_proj_ = eigenvectors_.transpose() * y;
}

GcvEvaluator::Point GcvEvaluator::evaluate(double tau0) const {
    if (!(tau0 > 0.0)) throw ValidationError("GCV: tau0 must be positive");
    const double n = static_cast<double>(y_.size());
    const double c = n * tau0;
    const Eigen::ArrayXd w = (eigenvalues_.array() + c).inverse();
    const Eigen::ArrayXd s = ones_proj_.array();
    const Eigen::ArrayXd z = y_proj_.array();
    const double s1 = (w * s * s).sum();
    const double b = (w * s * z).sum() / s1;
    const double rss = c * c * (w * w * (z - b * s).square()).sum();
    const double trace_resid = c * (w.sum() - (w * w * s * s).sum() / s1);
    Point pt{};
    pt.rss = rss;
    pt.trace_hat = n - trace_resid;
    pt.degenerate = !(trace_resid / n > kGcvSaturation);
    pt.score = pt.degenerate ? std::numeric_limits<double>::infinity()
                             : (rss / n) / ((trace_resid / n) * (trace_resid / n));
    return pt;
}

Eigen::VectorXd GcvEvaluator::fitted(double tau0) const {
    const double c = static_cast<double>(y_.size()) * tau0;
    const Eigen::ArrayXd w = (eigenvalues_.array() + c).inverse();
    const Eigen::ArrayXd s = ones_proj_.array();
    const Eigen::ArrayXd z = y_proj_.array();
    const double b = (w * s * z).sum() / (w * s * s).sum();
    const Eigen::VectorXd resid = eigenvectors_ * (c * w * (z - b * s)).matrix();
    return y_ - resid;
}

double gcv_score(const LongitudinalDataset& ds, const GramBlocks& blocks, const Eigen::VectorXd& theta, double tau0) {
    const GcvEvaluator eval(ds.responses(), blocks.aggregate(theta));
    const auto pt = eval.evaluate(tau0);
    if (pt.degenerate)
        throw NumericError("GCV: tr(I - H) = " + format_real(static_cast<double>(ds.N()) - pt.trace_hat) +
                           " is not positive (smoother saturated)");
    return pt.score;
}

Eigen::MatrixXd hat_matrix(const GramBlocks& blocks, const Eigen::VectorXd& theta, double tau0) {
    const Eigen::Index n = blocks.N();
    Eigen::MatrixXd h(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, k);
        h.col(k) = solve_fixed_theta_reduced(blocks, e, theta, tau0).fitted;
    }
    return h;
}

GcvTrace select_tau0(const LongitudinalDataset& ds, const GramBlocks& blocks, const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("tau0 grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw ValidationError("tau0 grid values must be positive");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw ValidationError("tau0 grid must be strictly increasing");
    }
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(blocks.p());
    for (Eigen::Index j = 0; j < blocks.p(); ++j)
        if (!blocks.design.col(j).isZero(0.0)) theta(j) = 1.0;

    const GcvEvaluator eval(ds.responses(), blocks.aggregate(theta));
    GcvTrace trace;
    trace.grid = grid;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto pt = eval.evaluate(grid[i]);
        trace.scores.push_back(pt.score);
        trace.edf.push_back(pt.trace_hat);
        if (!pt.degenerate && pt.score < best) {
            best = pt.score;
            trace.chosen = grid[i];
            trace.chosen_index = i;
            found = true;
        }
    }
    if (!found) throw NumericError("GCV: every tau0 grid point saturates the smoother");
    return trace;
}

void write_gcv_csv(const GcvTrace& trace, std::ostream& out) {
    out << "tau0,gcv,edf,chosen\n";
    for (std::size_t i = 0; i < trace.grid.size(); ++i)
        out << format_real(trace.grid[i]) << ',' << format_real(trace.scores[i]) << ',' << format_real(trace.edf[i])
            << ',' << (i == trace.chosen_index ? 1 : 0) << '\n';
}

std::vector<std::size_t> CvPlan::fold_members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> CvPlan::training_members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != fold) out.push_back(i);
    return out;
}

CvPlan make_cv_plan(std::size_t n_subjects, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("cross-validation needs at least 2 folds");
    if (k > n_subjects) throw ValidationError("more folds than subjects");
    std::vector<std::size_t> order(n_subjects);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    CvPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.assign(n_subjects, 0);
    for (std::size_t pos = 0; pos < n_subjects; ++pos) plan.assignment[order[pos]] = pos % k;
    return plan;
}

std::vector<double> default_M_grid(std::size_t p) {
    const std::size_t expected = std::min<std::size_t>(p, 20);
    std::vector<double> grid;
    for (std::size_t i = 0; i <= 4 * expected; ++i) grid.push_back(0.5 * static_cast<double>(i));
    return grid;
}

CvCurve cross_validate_M(const LongitudinalDataset& ds, const FitConfig& config, const std::vector<double>& grid_M,
                         const CvPlan& plan, int jobs) {
    if (grid_M.empty()) throw ValidationError("M grid is empty");
    for (double m : grid_M)
        if (!(m >= 0.0)) throw ValidationError("M grid values must be nonnegative");
    if (plan.assignment.size() != ds.n()) throw ValidationError("CV plan does not match the dataset");
    if (plan.k < 2) throw ValidationError("cross-validation needs at least 2 folds");

    const std::size_t k = plan.k;
    std::vector<std::vector<double>> sse(k, std::vector<double>(grid_M.size(), 0.0));
    std::vector<std::size_t> visits(k, 0);

    parallel_for(k, jobs, [&](std::size_t f) {
        const auto train_idx = plan.training_members(f);
        const auto test_idx = plan.fold_members(f);
        if (train_idx.empty()) throw ValidationError("fold " + std::to_string(f) + " leaves no training subjects");
        if (test_idx.empty()) throw ValidationError("fold " + std::to_string(f) + " has zero visits");
        const auto train = subset_subjects(ds, train_idx);
        const auto test = subset_subjects(ds, test_idx);
        const Eigen::VectorXd y_test = test.responses();
        visits[f] = test.N();
        const OneStepFit prepared(train, config);
        for (std::size_t g = 0; g < grid_M.size(); ++g) {
            const auto res = prepared.finish_budget(grid_M[g]);
            sse[f][g] = (y_test - predict_visits(res.model, test)).squaredNorm();
        }
    });

    CvCurve curve;
    curve.grid = grid_M;
    curve.fold_errors.assign(grid_M.size(), std::vector<double>(k, 0.0));
    const double total = static_cast<double>(std::accumulate(visits.begin(), visits.end(), std::size_t{0}));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid_M.size(); ++g) {
        double s = 0.0;
        for (std::size_t f = 0; f < k; ++f) {
            s += sse[f][g];
            curve.fold_errors[g][f] = sse[f][g] / static_cast<double>(visits[f]);
        }
        curve.errors.push_back(s / total);
        const double e = curve.errors.back();
        if (e < best || (e == best && grid_M[g] < curve.chosen)) {
            best = e;
            curve.chosen = grid_M[g];
            curve.chosen_index = g;
        }
    }
    return curve;
}

void write_cv_csv(const CvCurve& curve, std::ostream& out) {
    out << "M,cv_error";
    const std::size_t k = curve.fold_errors.empty() ? 0 : curve.fold_errors.front().size();
    for (std::size_t f = 0; f < k; ++f) out << ",fold" << f + 1;
    out << ",chosen\n";
    for (std::size_t g = 0; g < curve.grid.size(); ++g) {
        out << format_real(curve.grid[g]) << ',' << format_real(curve.errors[g]);
        for (double e : curve.fold_errors[g]) out << ',' << format_real(e);
        out << ',' << (g == curve.chosen_index ? 1 : 0) << '\n';
    }
}

}  // namespace vcsel
