#pragma once

// Shared fixtures for the unit and acceptance tests: a seeded generator,
// small dataset builders, and oracles that avoid the library's code paths.

#include "vcsel/dataset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
    std::size_t index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    Eigen::VectorXd normals(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

inline double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(1.0, std::max(a.norm(), b.norm()));
}

inline bool rel_approx(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol = 1e-12) {
    return rel_diff(a, b) <= tol;
}

/// One subject per entry of `times`; visits take rows of y and x in order.
inline vcsel::LongitudinalDataset make_dataset(const std::vector<std::vector<double>>& times, const Eigen::VectorXd& y,
                                               const Eigen::MatrixXd& x) {
    std::vector<vcsel::Subject> subjects;
    Eigen::Index a = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        vcsel::Subject s{"s" + std::to_string(10 + i), {}};
        for (double t : times[i]) {
            vcsel::Visit v{t, y(a), {}};
            for (Eigen::Index j = 0; j < x.cols(); ++j) v.covariates.emplace_back(x(a, j));
            s.visits.push_back(std::move(v));
            ++a;
        }
        subjects.push_back(std::move(s));
    }
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
    return vcsel::LongitudinalDataset(std::move(subjects), names, 1.0);
}

/// Random dataset with at most the given sizes; times on a 1/24 grid so
/// kernels stay reasonably conditioned.
inline vcsel::LongitudinalDataset random_dataset(Gen& g, std::size_t max_n, std::size_t max_m, std::size_t max_p,
                                                 std::size_t min_n = 1) {
    const std::size_t n = g.index(min_n, max_n);
    const std::size_t p = g.index(1, max_p);
    std::vector<std::vector<double>> times(n);
    std::size_t N = 0;
    for (auto& ts : times) {
        const std::size_t m = g.index(1, max_m);
        std::set<double> pick;
        while (pick.size() < m) pick.insert(static_cast<double>(g.index(0, 24)) / 24.0);
        ts.assign(pick.begin(), pick.end());
        N += m;
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(p));
    for (Eigen::Index a = 0; a < x.rows(); ++a)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(a, j) = g.uniform(-1.0, 1.0);
    Eigen::VectorXd y = g.normals(static_cast<Eigen::Index>(N));
    return make_dataset(times, y, x);
}

/// 1 + min(s, t), written out independently of the library.
inline double sobolev1(double s, double t) { return 1.0 + (s < t ? s : t); }

/// (1/N) ||y - b - sum_j beta_j||^2 + tau0 sum_j theta_j c'_j' Sigma_j c'_j with
/// beta_j(t_a) = theta_j sum_b c'_{jb} x_{bj} K(t_b, t_a), evaluated by plain loops.
/// z = (b, c'_1, ..., c'_p).
inline double fixed_theta_objective(const vcsel::LongitudinalDataset& ds, const Eigen::VectorXd& theta, double tau0,
                                    const Eigen::VectorXd& z) {
    std::vector<double> t, y;
    std::vector<std::vector<double>> x;
    for (const auto& s : ds.subjects())
        for (const auto& v : s.visits) {
            t.push_back(v.time);
            y.push_back(v.response);
            std::vector<double> row;
            for (const auto& c : v.covariates) row.push_back(*c);
            x.push_back(row);
        }
    const std::size_t N = t.size();
    const std::size_t p = ds.p();
    double loss = 0.0;
    for (std::size_t a = 0; a < N; ++a) {
        double f = z(0);
        for (std::size_t j = 0; j < p; ++j) {
            double beta = 0.0;
            for (std::size_t b = 0; b < N; ++b)
                beta += z(static_cast<Eigen::Index>(1 + j * N + b)) * x[b][j] * sobolev1(t[b], t[a]);
            f += theta(static_cast<Eigen::Index>(j)) * beta * x[a][j];
        }
        loss += (y[a] - f) * (y[a] - f);
    }
    double pen = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double q = 0.0;
        for (std::size_t a = 0; a < N; ++a)
            for (std::size_t b = 0; b < N; ++b)
                q += z(static_cast<Eigen::Index>(1 + j * N + a)) * x[a][j] * sobolev1(t[a], t[b]) * x[b][j] *
                     z(static_cast<Eigen::Index>(1 + j * N + b));
        pen += theta(static_cast<Eigen::Index>(j)) * q;
    }
    return loss / static_cast<double>(N) + tau0 * pen;
}

/// Newton iterations with finite-difference derivatives and a
/// pseudo-inverse step; exact for quadratics up to differencing error.
inline Eigen::VectorXd brute_force_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                            Eigen::VectorXd z, int iterations = 4, double h = 1e-2) {
    const Eigen::Index n = z.size();
    for (int it = 0; it < iterations; ++it) {
        const double f0 = f(z);
        Eigen::VectorXd grad(n);
        Eigen::MatrixXd hess(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd zp = z, zm = z;
            zp(i) += h;
            zm(i) -= h;
            const double fp = f(zp), fm = f(zm);
            grad(i) = (fp - fm) / (2 * h);
            hess(i, i) = (fp - 2 * f0 + fm) / (h * h);
        }
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                Eigen::VectorXd zpp = z, zpm = z, zmp = z, zmm = z;
                zpp(i) += h, zpp(j) += h;
                zpm(i) += h, zpm(j) -= h;
                zmp(i) -= h, zmp(j) += h;
                zmm(i) -= h, zmm(j) -= h;
                hess(i, j) = hess(j, i) = (f(zpp) - f(zpm) - f(zmp) + f(zmm)) / (4 * h * h);
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
        const double cut = 1e-9 * eig.eigenvalues().cwiseAbs().maxCoeff();
        Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double lam = eig.eigenvalues()(k);
            if (lam > cut) step += eig.eigenvectors().col(k) * (eig.eigenvectors().col(k).dot(grad) / lam);
        }
        const Eigen::VectorXd next = z - step;
        if (f(next) <= f0) z = next;
        else break;
    }
    return z;
}

/// Centered theta-step objective ||y~ - G~ theta||^2 + N tau0 d' theta (intercept profiled out).
inline double theta_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& g, const Eigen::VectorXd& d, double tau0,
                              const Eigen::VectorXd& theta) {
    const Eigen::VectorXd yc = y.array() - y.mean();
    const Eigen::MatrixXd gc = g.rowwise() - g.colwise().mean();
    return (yc - gc * theta).squaredNorm() + static_cast<double>(y.size()) * tau0 * d.dot(theta);
}

/// Exact minimizer of the theta step by enumerating active sets: for every
/// support S and budget state, solve the KKT equations, keep feasible points
/// with valid multipliers, and return the best. Exponential in p; p <= 8.
inline Eigen::VectorXd theta_step_oracle(const Eigen::VectorXd& y, const Eigen::MatrixXd& g, const Eigen::VectorXd& d,
                                         double tau0, double M) {
    const Eigen::Index p = g.cols();
    const Eigen::VectorXd yc = y.array() - y.mean();
    const Eigen::MatrixXd gc = g.rowwise() - g.colwise().mean();
    const Eigen::MatrixXd Q = 2.0 * gc.transpose() * gc;
    const Eigen::VectorXd r = 2.0 * gc.transpose() * yc - static_cast<double>(y.size()) * tau0 * d;
    Eigen::VectorXd best = Eigen::VectorXd::Zero(p);
    double best_val = theta_objective(y, g, d, tau0, best);
    const double tol = 1e-9 * (1.0 + Q.cwiseAbs().maxCoeff() + r.cwiseAbs().maxCoeff());
    for (unsigned mask = 1; mask < (1u << p); ++mask) {
        std::vector<Eigen::Index> S;
        for (Eigen::Index j = 0; j < p; ++j)
            if (mask & (1u << j)) S.push_back(j);
        const Eigen::Index k = static_cast<Eigen::Index>(S.size());
        for (int budget = 0; budget < 2; ++budget) {
            const Eigen::Index dim = k + budget;
            Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
            Eigen::VectorXd rhs(dim);
            for (Eigen::Index a = 0; a < k; ++a) {
                for (Eigen::Index b = 0; b < k; ++b) A(a, b) = Q(S[a], S[b]);
                rhs(a) = r(S[a]);
                if (budget) A(a, k) = A(k, a) = 1.0;
            }
            if (budget) rhs(k) = M;
            const Eigen::VectorXd sol = A.completeOrthogonalDecomposition().solve(rhs);
            if ((A * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) continue;
            Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
            for (Eigen::Index a = 0; a < k; ++a) theta(S[a]) = sol(a);
            const double mu = budget ? sol(k) : 0.0;
            if ((theta.array() < -1e-12).any() || mu < -tol || theta.sum() > M + 1e-12 * std::max(1.0, M)) continue;
            const Eigen::VectorXd grad = Q * theta - r + Eigen::VectorXd::Constant(p, mu);
            bool ok = true;
            for (Eigen::Index j = 0; j < p; ++j)
                if (!(mask & (1u << j)) && grad(j) < -tol) ok = false;
            if (!ok) continue;
            theta = theta.cwiseMax(0.0);
            const double val = theta_objective(y, g, d, tau0, theta);
            if (val < best_val) {
                best_val = val;
                best = theta;
            }
        }
    }
    return best;
}

/// Closed form for mutually orthogonal centered columns with d = 0:
/// theta_j(mu) = max(0, (a_j - mu/2) / n_j) with a_j = g_j'y, n_j = ||g_j||^2,
/// and mu the root of the piecewise-linear sum(theta(mu)) = M.
inline Eigen::VectorXd soft_threshold_oracle(const Eigen::VectorXd& a, const Eigen::VectorXd& n, double M) {
    auto theta_at = [&](double mu) { return Eigen::VectorXd(((a.array() - mu / 2) / n.array()).max(0.0)); };
    if (theta_at(0.0).sum() <= M) return theta_at(0.0);
    std::vector<double> knots;
    for (Eigen::Index j = 0; j < a.size(); ++j)
        if (a(j) > 0) knots.push_back(2 * a(j));
    knots.push_back(0.0);
    std::sort(knots.begin(), knots.end(), std::greater<>());
    // Walk down the breakpoints until the sum passes M, then solve the linear piece.
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double hi = knots[k], lo = knots[k + 1];
        if (theta_at(lo).sum() >= M) {
            double inv = 0.0, num = 0.0;
            for (Eigen::Index j = 0; j < a.size(); ++j)
                if (2 * a(j) >= hi) inv += 1.0 / n(j), num += a(j) / n(j);
            const double mu = 2.0 * (num - M) / inv;
            return theta_at(mu);
        }
    }
    return theta_at(0.0);
}

/// Two-point toy: t = (0, 1), y = (0, 3), x = 1, one subject per visit.
inline vcsel::LongitudinalDataset two_point() {
    Eigen::VectorXd y(2);
    y << 0.0, 3.0;
    return make_dataset({{0.0}, {1.0}}, y, Eigen::MatrixXd::Ones(2, 1));
}

}  // namespace testing
