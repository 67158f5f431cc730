#include "vcsel/solver.hpp"

#include "vcsel/error.hpp"

#include <cmath>
#include <vector>

namespace vcsel {

namespace {

// Intercept profiled out: work with centered y and centered columns of g.
struct CenteredProblem {
    Eigen::VectorXd y;     // centered response
    Eigen::MatrixXd g;     // centered columns
    Eigen::VectorXd norm2; // ||g_j||^2
    Eigen::VectorXd lin;   // N tau0 d_j
    Eigen::VectorXd corr;  // g_j' y
    double y_mean = 0.0;
    Eigen::VectorXd g_mean;
    double scale = 1.0;

    CenteredProblem(const Eigen::VectorXd& y_raw, const Eigen::MatrixXd& g_raw, const Eigen::VectorXd& d, double tau0) {
        if (g_raw.rows() != y_raw.size()) throw ValidationError("theta step: g has the wrong number of rows");
        if (d.size() != g_raw.cols()) throw ValidationError("theta step: d length does not match g");
        if ((d.array() < 0.0).any()) throw ValidationError("theta step: penalty scalars d must be nonnegative");
        if (!(tau0 >= 0.0)) throw ValidationError("theta step: tau0 must be nonnegative");
        y_mean = y_raw.mean();
        g_mean = g_raw.colwise().mean().transpose();
        y = y_raw.array() - y_mean;
        g = g_raw.rowwise() - g_mean.transpose();
        norm2 = g.colwise().squaredNorm().transpose();
        lin = static_cast<double>(y_raw.size()) * tau0 * d;
        corr = g.transpose() * y;
        const double gmax = norm2.size() ? std::sqrt(norm2.maxCoeff()) : 0.0;
        scale = 1.0 + 2.0 * y.norm() * gmax + (lin.size() ? lin.maxCoeff() : 0.0);
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& theta, double mu) const {
        const Eigen::VectorXd r = y - g * theta;
        return (-2.0 * (g.transpose() * r) + lin).array() + mu;
    }

    double kkt_residual(const Eigen::VectorXd& theta, double mu) const {
        const Eigen::VectorXd grad = gradient(theta, mu);
        double worst = 0.0;
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
            const double v = theta(j) > 0.0 ? std::abs(grad(j)) : std::max(0.0, -grad(j));
            worst = std::max(worst, v);
        }
        return worst / scale;
    }

    // Cyclic coordinate descent at fixed multiplier; theta is the warm start.
    int descend(Eigen::VectorXd& theta, double mu, const ThetaStepOptions& opts) const {
        Eigen::VectorXd r = y - g * theta;
        for (int sweep = 1; sweep <= opts.cd_max_iter; ++sweep) {
            for (Eigen::Index j = 0; j < theta.size(); ++j) {
                double next = 0.0;
                if (norm2(j) > 0.0) {
                    const double rho = g.col(j).dot(r) + norm2(j) * theta(j);
                    next = std::max(0.0, (rho - 0.5 * (lin(j) + mu)) / norm2(j));
                }
                const double delta = next - theta(j);
                if (delta != 0.0) {
                    r.noalias() -= delta * g.col(j);
                    theta(j) = next;
                }
            }
            if (kkt_residual(theta, mu) <= opts.cd_tol) return sweep;
        }
        throw NumericError("theta step: coordinate descent did not converge in " +
                           std::to_string(opts.cd_max_iter) + " sweeps (KKT residual " +
                           std::to_string(kkt_residual(theta, mu)) + ")");
    }

    // Exact solve of the budget-active KKT system on the support of theta.
    bool polish(Eigen::VectorXd& theta, double& mu, double M, const ThetaStepOptions& opts) const {
        std::vector<Eigen::Index> support;
        for (Eigen::Index j = 0; j < theta.size(); ++j)
            if (theta(j) > 0.0) support.push_back(j);
        const auto k = static_cast<Eigen::Index>(support.size());
        if (k == 0) return false;
        Eigen::MatrixXd gs(g.rows(), k);
        for (Eigen::Index a = 0; a < k; ++a) gs.col(a) = g.col(support[static_cast<std::size_t>(a)]);
        Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(k + 1, k + 1);
        sys.topLeftCorner(k, k) = 2.0 * gs.transpose() * gs;
        sys.topRightCorner(k, 1).setOnes();
        sys.bottomLeftCorner(1, k).setOnes();
        Eigen::VectorXd rhs(k + 1);
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index j = support[static_cast<std::size_t>(a)];
            rhs(a) = 2.0 * corr(j) - lin(j);
        }
        rhs(k) = M;
        const Eigen::VectorXd sol = sys.completeOrthogonalDecomposition().solve(rhs);
        if (!sol.allFinite() || (sol.head(k).array() <= 0.0).any() || sol(k) < 0.0) return false;
        Eigen::VectorXd cand = Eigen::VectorXd::Zero(theta.size());
        for (Eigen::Index a = 0; a < k; ++a) cand(support[static_cast<std::size_t>(a)]) = sol(a);
        if (kkt_residual(cand, sol(k)) > opts.cd_tol) return false;
        theta = std::move(cand);
        mu = sol(k);
        return true;
    }

    ThetaStepResult finish(Eigen::VectorXd theta, double mu, int sweeps, bool active) const {
        ThetaStepResult out;
        out.b = y_mean - g_mean.dot(theta);
        out.multiplier = mu;
        out.kkt_residual = kkt_residual(theta, mu);
        out.kkt_scale = scale;
        out.sweeps = sweeps;
        out.budget_active = active;
        out.theta = std::move(theta);
        return out;
    }
};

}  // namespace

ThetaStepResult solve_theta_step_penalized(const Eigen::VectorXd& y, const Eigen::MatrixXd& g,
                                           const Eigen::VectorXd& d, double tau0, double multiplier,
                                           const ThetaStepOptions& opts) {
    if (!(multiplier >= 0.0)) throw ValidationError("theta step: multiplier must be nonnegative");
    CenteredProblem prob(y, g, d, tau0);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(g.cols());
    const int sweeps = prob.descend(theta, multiplier, opts);
    return prob.finish(std::move(theta), multiplier, sweeps, false);
}

ThetaStepResult solve_theta_step(const Eigen::VectorXd& y, const Eigen::MatrixXd& g, const Eigen::VectorXd& d,
                                 double tau0, double M, const ThetaStepOptions& opts) {
    if (!(M >= 0.0)) throw ValidationError("theta step: budget M must be nonnegative");
    CenteredProblem prob(y, g, d, tau0);
    const Eigen::Index p = g.cols();
    const double tol = opts.bisect_tol * std::max(1.0, M);

    // Smallest multiplier at which theta = 0 is optimal.
    double mu_zero = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) mu_zero = std::max(mu_zero, 2.0 * prob.corr(j) - prob.lin(j));

    if (M == 0.0) return prob.finish(Eigen::VectorXd::Zero(p), mu_zero, 0, mu_zero > 0.0);

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    int sweeps = prob.descend(theta, 0.0, opts);
    if (theta.sum() <= M + tol) return prob.finish(std::move(theta), 0.0, sweeps, false);

    double lo = 0.0;
    double hi = mu_zero;
    Eigen::VectorXd theta_hi = Eigen::VectorXd::Zero(p);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        sweeps += prob.descend(theta, mid, opts);
        const double s = theta.sum();
        if (s > M + tol) {
            lo = mid;
        } else {
            hi = mid;
            theta_hi = theta;
            if (s >= M - tol) break;
        }
    }
    if (std::abs(theta_hi.sum() - M) > tol) prob.polish(theta_hi, hi, M, opts);
    return prob.finish(std::move(theta_hi), hi, sweeps, true);
}

ThetaStepResult solve_theta_step(const LongitudinalDataset& ds, const Eigen::MatrixXd& g, const Eigen::VectorXd& d,
                                 double tau0, double M, const ThetaStepOptions& opts) {
    return solve_theta_step(ds.responses(), g, d, tau0, M, opts);
}

Eigen::VectorXd theta_step_gradient(const Eigen::VectorXd& y, const Eigen::MatrixXd& g, const Eigen::VectorXd& d,
                                    double tau0, const Eigen::VectorXd& theta, double multiplier) {
    CenteredProblem prob(y, g, d, tau0);
    return prob.gradient(theta, multiplier);
}

void theta_step_inputs(const GramBlocks& blocks, const Eigen::VectorXd& u, Eigen::MatrixXd& g, Eigen::VectorXd& d) {
    g.resize(blocks.N(), blocks.p());
    d.resize(blocks.p());
    for (Eigen::Index j = 0; j < blocks.p(); ++j) {
        g.col(j) = blocks.sigma_times(j, u);
        d(j) = std::max(0.0, u.dot(g.col(j)));
    }
}

}  // namespace vcsel
