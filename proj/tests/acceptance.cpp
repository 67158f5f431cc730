// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "support.hpp"

#include "vcsel/cli.hpp"
#include "vcsel/diagnostics.hpp"
#include "vcsel/fit.hpp"
#include "vcsel/parallel.hpp"
#include "vcsel/solver.hpp"
#include "vcsel/synth.hpp"
#include "vcsel/tuning.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace vcsel;
namespace fs = std::filesystem;

namespace {

const KernelSpec kSob{};

struct Verdict {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

template <typename Fn>
void criterion(int id, const std::string& title, double budget_s, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = fn();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = v.pass;
    std::ostringstream line;
    line << (pass ? "PASS" : "FAIL") << " [" << id << "] " << title << ": " << v.detail;
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.1f s", secs);
    line << buf;
    if (budget_s > 0) {
        line << " of " << budget_s << " s";
        if (secs > budget_s) {
            pass = false;
            line.str("");
            line << "FAIL [" << id << "] " << title << ": " << v.detail << buf << " exceeds " << budget_s << " s";
        }
    }
    line << ")";
    if (!pass) ++g_failures;
    std::cout << line.str() << std::endl;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

double rel(double a, double b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double s = std::max(a.norm(), b.norm());
    return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// Random instance with N p <= 200 for the literal solve.
LongitudinalDataset literal_instance(testing::Gen& g) {
    for (;;) {
        const auto ds = testing::random_dataset(g, 12, 5, 5, 2);
        if (ds.N() * ds.p() <= 200) return ds;
    }
}

ComponentCoefficients zeros(const GramBlocks& blocks) {
    return ComponentCoefficients(static_cast<std::size_t>(blocks.p()), Eigen::VectorXd::Zero(blocks.N()));
}

// Fits shared by criteria 3 and 6.
struct SuiteFit {
    LongitudinalDataset ds;
    GramBlocks blocks;
    double tau0, tau1;
    AlternatingFit alt;
};

std::vector<SuiteFit> alternating_suite() {
    testing::Gen g(2002);
    std::vector<SuiteFit> out;
    for (int rep = 0; rep < 100; ++rep) {
        auto ds = literal_instance(g);
        auto blocks = build_gram_blocks(kSob, ds);
        const double tau0 = g.log_uniform(1e-3, 1.0), tau1 = g.log_uniform(1e-4, 0.1);
        auto alt = fit_alternating(ds, blocks, tau0, tau1);
        out.push_back({std::move(ds), std::move(blocks), tau0, tau1, std::move(alt)});
    }
    return out;
}

std::vector<FitResult> one_step_suite(std::vector<LongitudinalDataset>& data) {
    testing::Gen g(5005);
    std::vector<FitResult> out;
    for (int rep = 0; rep < 100; ++rep) {
        data.push_back(testing::random_dataset(g, 10, 5, 5, 2));
        FitConfig cfg;
        cfg.M = g.uniform(0.0, 5.0);
        cfg.tau0_grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
        out.push_back(fit_one_step(data.back(), cfg));
    }
    return out;
}

double f1_score(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& truth) {
    std::size_t tp = 0;
    for (auto j : selected)
        if (std::find(truth.begin(), truth.end(), j) != truth.end()) ++tp;
    if (selected.empty() && truth.empty()) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(selected.size() + truth.size());
}

SyntheticScenario support_scenario(std::uint64_t seed) {
    auto sc = standard_scenario();
    sc.horizon_visit = false;
    sc.seed = seed;
    return sc;
}

// Tuned-M fit as the CLI runs it: GCV for tau0, 5-fold subject CV over the default M grid.
FitResult tuned_fit(const LongitudinalDataset& ds, std::uint64_t seed) {
    FitConfig cfg;
    const OneStepFit prepared(ds, cfg);
    FitConfig fixed = cfg;
    fixed.tau0 = prepared.tau0();
    const auto cv = cross_validate_M(ds, fixed, default_M_grid(ds.p()), make_cv_plan(ds.n(), 5, seed));
    return prepared.finish_budget(cv.chosen);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

int cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    return run_cli(args, out, err);
}

std::string cli_stdout(std::vector<std::string> args) {
    std::ostringstream out, err;
    if (run_cli(args, out, err) != 0) throw std::runtime_error("cli failed: " + err.str());
    return out.str();
}

}  // namespace

int main() {
    std::cout << "acceptance run, " << jobs() << " hardware thread(s)" << std::endl;

    criterion(1, "fixed-theta solve matches brute-force minimizer", 60, [] {
        testing::Gen g(1001);
        double worst = 0.0;
        for (int rep = 0; rep < 50; ++rep) {
            const auto ds = testing::random_dataset(g, 3, 2, 2);
            const auto blocks = build_gram_blocks(kSob, ds);
            Eigen::VectorXd theta(blocks.p());
            for (Eigen::Index j = 0; j < theta.size(); ++j) theta(j) = g.uniform(0.2, 2.0);
            const double tau0 = g.log_uniform(1e-2, 1.0);
            const auto sol = solve_fixed_theta_reduced(ds, blocks, theta, tau0);
            const double ours = objective_aux(ds, blocks, theta, sol.b, sol.coefficients(), tau0, 0.0);
            auto f = [&](const Eigen::VectorXd& z) { return testing::fixed_theta_objective(ds, theta, tau0, z); };
            const Eigen::VectorXd z =
                testing::brute_force_minimize(f, Eigen::VectorXd::Zero(1 + blocks.N() * blocks.p()));
            // Relative to the objective at z = 0, since one-visit instances have a zero minimum.
            const double f0 = f(Eigen::VectorXd::Zero(z.size()));
            worst = std::max(worst, std::abs(ours - f(z)) / std::max({std::abs(ours), std::abs(f(z)), f0}));
        }
        return Verdict{worst <= 1e-6, "worst relative gap " + sci(worst) + " over 50 instances (tol 1e-6)"};
    });

    criterion(2, "literal and reduced solves agree", 60, [] {
        testing::Gen g(2002);
        double worst_b = 0, worst_fit = 0, worst_norm = 0;
        for (int rep = 0; rep < 100; ++rep) {
            const auto ds = literal_instance(g);
            const auto blocks = build_gram_blocks(kSob, ds);
            Eigen::VectorXd theta(blocks.p());
            for (Eigen::Index j = 0; j < theta.size(); ++j) theta(j) = g.uniform(0.0, 1.0) < 0.15 ? 0.0 : g.uniform(0.2, 2.0);
            const double tau0 = g.log_uniform(1e-3, 1.0);
            const auto red = solve_fixed_theta_reduced(ds, blocks, theta, tau0);
            const auto lit = solve_fixed_theta_literal(ds, blocks, theta, tau0);
            worst_b = std::max(worst_b, rel(red.b, lit.b));
            worst_fit = std::max(worst_fit, rel(red.fitted, lit.fitted));
            worst_norm = std::max(worst_norm, rel(red.component_norms, lit.component_norms));
        }
        const bool ok = worst_b <= 1e-8 && worst_fit <= 1e-8 && worst_norm <= 1e-8;
        return Verdict{ok, "worst relative diff b " + sci(worst_b) + ", fitted " + sci(worst_fit) + ", norms " +
                               sci(worst_norm) + " over 100 instances (tol 1e-8)"};
    });

    const auto suite2 = alternating_suite();

    criterion(3, "weighted objective at theta(beta) equals the primal objective", 0, [&] {
        testing::Gen g(3003);
        double worst_eq = 0.0, worst_below = 0.0;
        for (const auto& s : suite2) {
            const auto coeffs = s.alt.solution.coefficients();
            const Eigen::VectorXd star = theta_from_beta(component_norms(s.blocks, coeffs), s.tau0, s.tau1);
            const double primal =
                objective_primal(s.ds, s.blocks, s.alt.solution.b, coeffs, lambda_from_taus(s.tau0, s.tau1));
            const double aux = objective_aux(s.ds, s.blocks, star, s.alt.solution.b, coeffs, s.tau0, s.tau1);
            worst_eq = std::max(worst_eq, rel(aux, primal));
            for (int k = 0; k < 50; ++k) {
                Eigen::VectorXd theta(star.size());
                for (Eigen::Index j = 0; j < theta.size(); ++j)
                    theta(j) = star(j) > 0 ? g.log_uniform(1e-3, 10.0) * star(j) : (g.uniform(0, 1) < 0.5 ? 0.0 : g.uniform(0, 3));
                const double other = objective_aux(s.ds, s.blocks, theta, s.alt.solution.b, coeffs, s.tau0, s.tau1);
                worst_below = std::max(worst_below, (primal - other) / std::abs(primal));
            }
        }
        const bool ok = worst_eq <= 1e-10 && worst_below <= 1e-10;
        return Verdict{ok, "worst relative gap " + sci(worst_eq) + ", worst undershoot at random theta " +
                               sci(std::max(0.0, worst_below)) + " over " + std::to_string(suite2.size()) +
                               " converged fits x 50 draws (tol 1e-10)"};
    });

    criterion(4, "theta step satisfies KKT and the orthogonal closed form", 60, [] {
        testing::Gen gen(4004);
        const ThetaStepOptions opts;
        int kkt_bad = 0, ortho = 0;
        double worst_ortho = 0.0, worst_kkt = 0.0;
        for (int rep = 0; rep < 200; ++rep) {
            const Eigen::Index n = static_cast<Eigen::Index>(gen.index(4, 30));
            const Eigen::Index p = static_cast<Eigen::Index>(gen.index(1, std::min<std::size_t>(8, n - 1)));
            const bool orthogonal = rep % 4 == 0;
            Eigen::MatrixXd g(n, p);
            Eigen::VectorXd d = Eigen::VectorXd::Zero(p);
            if (orthogonal) {
                Eigen::MatrixXd raw(n, p);
                for (Eigen::Index j = 0; j < p; ++j) raw.col(j) = gen.normals(n);
                raw = raw.rowwise() - raw.colwise().mean();
                const Eigen::MatrixXd q = raw.householderQr().householderQ() * Eigen::MatrixXd::Identity(n, p);
                for (Eigen::Index j = 0; j < p; ++j) g.col(j) = gen.uniform(0.5, 3.0) * q.col(j);
            } else {
                for (Eigen::Index j = 0; j < p; ++j) g.col(j) = gen.normals(n) * gen.uniform(0.1, 3.0);
                for (Eigen::Index j = 0; j < p; ++j) d(j) = gen.uniform(0.0, 0.5);
            }
            const Eigen::VectorXd y = gen.normals(n) * gen.uniform(0.1, 5.0);
            const double tau0 = orthogonal ? 0.0 : gen.log_uniform(1e-3, 1.0);
            const double M = gen.uniform(0.0, 5.0);
            const auto res = solve_theta_step(y, g, d, tau0, M, opts);

            const double btol = opts.bisect_tol * std::max(1.0, M);
            bool ok = (res.theta.array() >= 0.0).all() && res.theta.sum() <= M + btol;
            if (res.multiplier > 0.0 && M > 0.0) ok = ok && std::abs(res.theta.sum() - M) <= btol;
            const Eigen::VectorXd grad = theta_step_gradient(y, g, d, tau0, res.theta, res.multiplier);
            double viol = 0.0;
            for (Eigen::Index j = 0; j < p; ++j)
                viol = std::max(viol, res.theta(j) > 0.0 ? std::abs(grad(j)) : std::max(0.0, -grad(j)));
            viol /= res.kkt_scale;
            worst_kkt = std::max(worst_kkt, viol);
            if (!(ok && viol <= opts.cd_tol)) ++kkt_bad;

            if (orthogonal) {
                ++ortho;
                const Eigen::VectorXd yc = y.array() - y.mean();
                const Eigen::VectorXd oracle = testing::soft_threshold_oracle(
                    g.transpose() * yc, g.colwise().squaredNorm().transpose(), M);
                worst_ortho = std::max(worst_ortho, (res.theta - oracle).cwiseAbs().maxCoeff() /
                                                        std::max(1.0, oracle.cwiseAbs().maxCoeff()));
            }
        }
        const bool ok = kkt_bad == 0 && worst_ortho <= 1e-8;
        return Verdict{ok, std::to_string(200 - kkt_bad) + "/200 satisfy KKT (worst scaled residual " +
                               sci(worst_kkt) + "), " + std::to_string(ortho) +
                               " orthogonal cases worst diff " + sci(worst_ortho) + " (tol 1e-8)"};
    });

    std::vector<LongitudinalDataset> suite5_data;
    const auto suite5 = one_step_suite(suite5_data);

    criterion(5, "one-step objective is monotone across steps 2, 3, 4", 0, [&] {
        int bad = 0;
        double worst = 0.0;
        for (const auto& r : suite5) {
            const auto& o = r.aux_objective;
            const double up1 = (o[1] - o[0]) / std::abs(o[0]);
            const double up2 = (o[2] - o[1]) / std::abs(o[1]);
            worst = std::max({worst, up1, up2});
            if (up1 > 1e-8 || up2 > 1e-8) ++bad;
        }
        return Verdict{bad == 0, std::to_string(suite5.size() - bad) + "/100 monotone, worst relative increase " +
                                     sci(std::max(0.0, worst)) + " (tol 1e-8)"};
    });

    criterion(6, "fits lie in the bounding set and beat the null model", 0, [&] {
        int outside = 0, worse = 0, total = 0;
        auto check = [&](const LongitudinalDataset& ds, const GramBlocks& blocks, const FittedModel& model,
                         double b, const ComponentCoefficients& coeffs, double lambda) {
            ++total;
            if (!bounding_set_diagnostics(ds, blocks, model, lambda).in_omega) ++outside;
            const double fit = objective_primal(ds, blocks, b, coeffs, lambda);
            const double null = objective_primal(ds, blocks, ds.responses().mean(), zeros(blocks), lambda);
            if (fit > null * (1 + 1e-12)) ++worse;
        };
        for (const auto& s : suite2) {
            const auto model = make_model(s.ds, s.blocks, s.alt.solution, s.tau0, s.tau1, FitConfig{});
            check(s.ds, s.blocks, model, s.alt.solution.b, s.alt.solution.coefficients(),
                  lambda_from_taus(s.tau0, s.tau1));
        }
        for (std::size_t i = 0; i < suite5.size(); ++i) {
            const auto& r = suite5[i];
            const auto blocks = build_gram_blocks(kSob, suite5_data[i]);
            check(suite5_data[i], blocks, r.model, r.model.b, r.step4.coefficients(),
                  lambda_from_taus(r.model.tau0, r.model.tau1));
        }
        const bool ok = outside == 0 && worse == 0;
        return Verdict{ok, std::to_string(total) + " fits, " + std::to_string(outside) + " outside the set, " +
                               std::to_string(worse) + " above the null objective"};
    });

    std::vector<SyntheticCohort> cohorts(20);
    std::vector<double> f1(20);
    criterion(7, "support recovery on the standard scenario", 900, [&] {
        auto quiet = support_scenario(1);
        quiet.noise_sd = 0.0;
        const auto clean = generate(quiet);
        const double f1_clean = f1_score(tuned_fit(clean.dataset, 1).model.selected, clean.truth.active);

        parallel_for(20, jobs(), [&](std::size_t s) {
            cohorts[s] = generate(support_scenario(s + 1));
            f1[s] = f1_score(tuned_fit(cohorts[s].dataset, s + 1).model.selected, cohorts[s].truth.active);
        });
        double mean = 0.0;
        std::string per;
        for (double v : f1) {
            mean += v / 20.0;
            char buf[16];
            std::snprintf(buf, sizeof buf, "%.2f ", v);
            per += buf;
        }
        char head[96];
        std::snprintf(head, sizeof head, "noiseless F1 %.3f, mean F1 %.3f over 20 seeds (need 1.0 and >= 0.85); ",
                      f1_clean, mean);
        return Verdict{f1_clean == 1.0 && mean >= 0.85, head + per};
    });

    criterion(8, "holdout RMSE falls as waves are added", 1200, [] {
        WavesOptions w;
        w.jobs = jobs();
        const auto rows = waves_experiment(standard_scenario(), w);
        const std::size_t levels = w.levels.size();
        int monotone = 0;
        std::vector<double> mean(levels, 0.0);
        for (std::size_t s = 0; s < w.seeds; ++s) {
            bool ok = true;
            for (std::size_t l = 0; l < levels; ++l) {
                const double r = rows[s * levels + l].rmse;
                mean[l] += r / static_cast<double>(w.seeds);
                if (l > 0 && r > rows[s * levels + l - 1].rmse) ok = false;
            }
            monotone += ok;
        }
        std::string seq;
        for (double m : mean) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%.3f ", m);
            seq += buf;
        }
        return Verdict{monotone >= 16, std::to_string(monotone) + "/20 seeds non-increasing (need 16); mean RMSE by level " + seq};
    });

    criterion(9, "GCV tau0 is near the true-risk minimizer", 0, [&] {
        const auto grid = default_tau0_grid();
        int near = 0;
        std::string per;
        for (const auto& c : cohorts) {
            const auto blocks = build_gram_blocks(kSob, c.dataset);
            const auto trace = select_tau0(c.dataset, blocks, grid);
            const GcvEvaluator eval(c.dataset.responses(), blocks.aggregate(Eigen::VectorXd::Ones(blocks.p())));
            std::size_t best = 0;
            double best_risk = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const double risk = (eval.fitted(grid[k]) - c.truth.noiseless).squaredNorm();
                if (risk < best_risk) best_risk = risk, best = k;
            }
            const auto gap = static_cast<long>(trace.chosen_index) - static_cast<long>(best);
            near += std::abs(gap) <= 1;
            per += std::to_string(gap) + " ";
        }
        return Verdict{near >= 14, std::to_string(near) + "/20 seeds within one grid step (need 14); index gaps " + per};
    });

    criterion(10, "CLI output does not depend on --jobs", 0, [] {
        const fs::path dir = fs::path(VCSEL_ACCEPT_TMP) / "determinism";
        fs::remove_all(dir);
        fs::create_directories(dir);
        const auto d = [&](const std::string& name) { return (dir / name).string(); };
        std::vector<std::string> mismatches;
        auto same = [&](const std::string& what, const std::string& a, const std::string& b) {
            if (a != b || a.empty()) mismatches.push_back(what);
        };

        if (cli({"simulate", "--seed", "11", "--out", d("a.csv")}) || cli({"simulate", "--seed", "11", "--out", d("b.csv")}))
            throw std::runtime_error("simulate failed");
        same("simulate", slurp(d("a.csv")), slurp(d("b.csv")));

        const std::vector<std::string> job_values{"1", "2", "5"};
        for (const auto& j : job_values) {
            const std::string out = d("model_j" + j + ".json");
            if (cli({"fit", "--data", d("a.csv"), "--jobs", j, "--seed", "11", "--out", out}))
                throw std::runtime_error("fit failed");
            if (cli({"predict", "--model", out, "--data", d("a.csv"), "--out", d("pred_j" + j + ".csv")}))
                throw std::runtime_error("predict failed");
        }
        for (std::size_t k = 1; k < job_values.size(); ++k)
            for (const std::string ext : {".json", ".json.report.txt", ".json.gcv.csv", ".json.cv.csv"})
                same("fit " + ext, slurp(d("model_j1" + ext)), slurp(d("model_j" + job_values[k] + ext)));
        for (std::size_t k = 1; k < job_values.size(); ++k)
            same("predict", slurp(d("pred_j1.csv")), slurp(d("pred_j" + job_values[k] + ".csv")));

        std::ofstream(d("small.txt")) << "n = 30\np = 6\nactive = 1:sin,2:linear\n";
        const std::vector<std::string> waves{"waves", "--scenario", d("small.txt"), "--seeds", "3", "--M-grid", "0,1,2,4"};
        auto w1 = waves, w4 = waves;
        w1.insert(w1.end(), {"--jobs", "1"});
        w4.insert(w4.end(), {"--jobs", "4"});
        same("waves", cli_stdout(w1), cli_stdout(w4));
        same("summarize", cli_stdout({"summarize", "--data", d("a.csv")}), cli_stdout({"summarize", "--data", d("a.csv")}));

        std::string detail = "simulate, fit (jobs 1/2/5), predict, waves (jobs 1/4), summarize compared";
        if (!mismatches.empty()) {
            detail += "; differing:";
            for (const auto& m : mismatches) detail += " " + m;
        }
        return Verdict{mismatches.empty(), detail};
    });

    std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criterion/criteria failed")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
