#include "vcsel/synth.hpp"

#include "vcsel/error.hpp"
#include "vcsel/fit.hpp"
#include "vcsel/numfmt.hpp"
#include "vcsel/parallel.hpp"
#include "vcsel/predictor.hpp"
#include "vcsel/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace vcsel {

namespace {

// Held-out subjects keep only their visits at or after the horizon.
LongitudinalDataset horizon_visits(const LongitudinalDataset& ds, double horizon) {
    std::vector<Subject> kept;
    for (const auto& s : ds.subjects()) {
        Subject out{s.id, {}};
        for (const auto& v : s.visits)
            if (v.time >= horizon) out.visits.push_back(v);
        if (!out.visits.empty()) kept.push_back(std::move(out));
    }
    if (kept.empty()) throw ValidationError("no held-out visit at the horizon " + format_real(horizon));
    return LongitudinalDataset(std::move(kept), ds.covariate_names(), ds.time_divisor());
}

}  // namespace

std::vector<WavesRow> waves_experiment(const SyntheticScenario& scenario, const WavesOptions& options) {
    if (options.levels.empty()) throw ValidationError("waves: no levels");
    for (std::size_t l = 0; l < options.levels.size(); ++l) {
        if (!(options.levels[l] > 0.0 && options.levels[l] <= 1.0))
            throw ValidationError("waves: levels must lie in (0, 1]");
        if (l > 0 && !(options.levels[l] > options.levels[l - 1]))
            throw ValidationError("waves: levels must be strictly increasing");
    }
    if (options.seeds == 0) throw ValidationError("waves: need at least one seed");
    if (scenario.n < 4) throw ValidationError("waves: need at least 4 subjects");

    const std::size_t n_levels = options.levels.size();
    struct Split {
        LongitudinalDataset train;
        LongitudinalDataset test;
    };
    std::vector<Split> splits(options.seeds);
    for (std::size_t s = 0; s < options.seeds; ++s) {
        SyntheticScenario sc = scenario;
        sc.seed = options.base_seed + s;
        const auto cohort = generate(sc);
        std::vector<std::size_t> order(cohort.dataset.n());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(sc.seed);
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t half = order.size() / 2;
        std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
        std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
        splits[s] = {subset_subjects(cohort.dataset, train_idx),
                     horizon_visits(subset_subjects(cohort.dataset, test_idx), options.horizon)};
    }

    std::vector<WavesRow> rows(options.seeds * n_levels);
    parallel_for(rows.size(), options.jobs, [&](std::size_t task) {
        const std::size_t s = task / n_levels;
        const std::size_t l = task % n_levels;
        const std::uint64_t seed = options.base_seed + s;
        const auto train = restrict_waves(splits[s].train, options.levels[l]);
        const auto& test = splits[s].test;

        const auto grid = options.M_grid.empty() ? default_M_grid(train.p()) : options.M_grid;
        const auto plan = make_cv_plan(train.n(), std::min(options.folds, train.n()), seed);
        const auto cv = cross_validate_M(train, options.config, grid, plan, 1);
        const auto fit = OneStepFit(train, options.config).finish_budget(cv.chosen);

        const Eigen::VectorXd resid = test.responses() - predict_visits(fit.model, test);
        WavesRow& row = rows[task];
        row.seed = seed;
        row.level = l + 1;
        row.max_time = options.levels[l];
        row.n_train = train.n();
        row.N_train = train.N();
        row.n_test = test.n();
        row.tau0 = fit.model.tau0;
        row.M = cv.chosen;
        row.n_selected = fit.model.selected.size();
        row.rmse = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
    });
    return rows;
}

void write_waves_csv(const std::vector<WavesRow>& rows, std::ostream& out) {
    out << "seed,level,max_time,n_train,N_train,n_test,tau0,M,n_selected,rmse\n";
    for (const auto& r : rows)
        out << r.seed << ',' << r.level << ',' << format_real(r.max_time) << ',' << r.n_train << ',' << r.N_train
            << ',' << r.n_test << ',' << format_real(r.tau0) << ',' << format_real(r.M) << ',' << r.n_selected << ','
            << format_real(r.rmse) << '\n';
}

}  // namespace vcsel
