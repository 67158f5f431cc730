#pragma once

#include "vcsel/dataset.hpp"
#include "vcsel/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace vcsel {

enum class CurveKind { Sin2Pi, Linear, Quadratic, Constant, Zero };

/// Named ground-truth coefficient curves: sin(2 pi t), t, (1 - t)^2, a constant, zero.
struct CoefficientCurve {
    CurveKind kind = CurveKind::Zero;
    double level = 0.0;  // Constant only

    double operator()(double t) const;
    std::string name() const;
    static CoefficientCurve parse(const std::string& text);  // "sin", "linear", "quadratic", "const:0.8", "zero"
};

enum class ScheduleLaw { Grid, Uniform };
enum class CovariateLaw { Iid, Smooth };

struct SyntheticScenario {
    std::size_t n = 100;
    std::size_t p = 20;
    std::map<std::size_t, CoefficientCurve> active;  // 0-based covariate index
    double intercept = 0.0;
    double noise_sd = 0.5;

    ScheduleLaw schedule = ScheduleLaw::Grid;
    /// bl, M06, M12, M18, M24, M36 on a 48-month scale.
    std::vector<double> grid_times{0.0, 6.0 / 48, 12.0 / 48, 18.0 / 48, 24.0 / 48, 36.0 / 48};
    /// Relative subject counts for mix_min_visits, mix_min_visits + 1, ... grid visits;
    /// empty means every subject attends every grid time.
    std::vector<double> visit_mix{12, 22, 48, 90};
    std::size_t mix_min_visits = 3;
    /// Adds a visit at t = 1 (M48) to every subject, the held-out prediction time.
    bool horizon_visit = true;
    std::size_t m_min = 2;  // uniform law
    std::size_t m_max = 6;

    double missing_rate = 0.0;
    CovariateLaw covariate_law = CovariateLaw::Iid;
    MissingPolicy policy;
    std::uint64_t seed = 1;

    void validate() const;
};

/// n = 100, p = 20, truth {sin(2 pi t), t, (1-t)^2, 0.8} on covariates 1-4, sigma = 0.5,
/// visit grid with the converter/non-converter visit-count mix, M48 horizon visit.
SyntheticScenario standard_scenario();

SyntheticScenario read_scenario(std::istream& in);
SyntheticScenario read_scenario(const std::filesystem::path& path);
void write_scenario(const SyntheticScenario& s, std::ostream& out);

struct GroundTruth {
    double b = 0.0;
    std::vector<CoefficientCurve> curves;  // length p, Zero when inactive
    std::vector<std::size_t> active;
    double noise_sd = 0.0;
    Eigen::VectorXd noiseless;  // per visit, dataset order

    std::size_t p() const { return curves.size(); }
    double intercept() const { return b; }
    double coefficient(std::size_t j, double t) const { return curves.at(j)(t); }
};

struct SyntheticCohort {
    LongitudinalDataset dataset;
    GroundTruth truth;
};

/// y = b + sum_{j active} beta_j(t) x_j(t) + eps, reproducible from the scenario seed.
SyntheticCohort generate(const SyntheticScenario& scenario);

/// Visit counts per bin by largest remainder, so the counts sum to n exactly.
std::vector<std::size_t> allocate_counts(const std::vector<double>& weights, std::size_t n);

// ---------------------------------------------------------------------------
// Growing-waves experiment
// ---------------------------------------------------------------------------

struct WavesOptions {
    /// One month past each scheduled visit: bl, +M06, ..., +M36.
    std::vector<double> levels{1.0 / 48, 7.0 / 48, 13.0 / 48, 19.0 / 48, 25.0 / 48, 37.0 / 48};
    std::size_t seeds = 20;
    std::uint64_t base_seed = 1;
    FitConfig config;
    std::vector<double> M_grid;  // empty = default grid for p
    std::size_t folds = 5;
    double horizon = 1.0;
    int jobs = 1;
};

struct WavesRow {
    std::uint64_t seed = 0;
    std::size_t level = 0;  // 1-based
    double max_time = 0.0;
    std::size_t n_train = 0;
    std::size_t N_train = 0;
    std::size_t n_test = 0;
    double tau0 = 0.0;
    double M = 0.0;
    std::size_t n_selected = 0;
    double rmse = 0.0;
};

/// For each seed: generate, split subjects in half, and for every level fit
/// the training half restricted to that level (GCV tau0, k-fold CV for M),
/// then score the held-out half at the horizon. Rows are seed-major.
std::vector<WavesRow> waves_experiment(const SyntheticScenario& scenario, const WavesOptions& options);

void write_waves_csv(const std::vector<WavesRow>& rows, std::ostream& out);

}  // namespace vcsel
