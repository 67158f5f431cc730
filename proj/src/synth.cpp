#include "vcsel/synth.hpp"

#include "vcsel/error.hpp"
#include "vcsel/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace vcsel {

double CoefficientCurve::operator()(double t) const {
    switch (kind) {
        case CurveKind::Sin2Pi: return std::sin(2.0 * std::numbers::pi * t);
        case CurveKind::Linear: return t;
        case CurveKind::Quadratic: return (1.0 - t) * (1.0 - t);
        case CurveKind::Constant: return level;
        case CurveKind::Zero: return 0.0;
    }
    return 0.0;
}

std::string CoefficientCurve::name() const {
    switch (kind) {
        case CurveKind::Sin2Pi: return "sin";
        case CurveKind::Linear: return "linear";
        case CurveKind::Quadratic: return "quadratic";
        case CurveKind::Constant: return "const:" + format_real(level);
        case CurveKind::Zero: return "zero";
    }
    return "?";
}

CoefficientCurve CoefficientCurve::parse(const std::string& text) {
    if (text == "sin") return {CurveKind::Sin2Pi, 0.0};
    if (text == "linear") return {CurveKind::Linear, 0.0};
    if (text == "quadratic") return {CurveKind::Quadratic, 0.0};
    if (text == "zero") return {CurveKind::Zero, 0.0};
    if (text.rfind("const:", 0) == 0) {
        auto v = parse_real(text.substr(6));
        if (!v) throw ValidationError("bad constant curve '" + text + "'");
        return {CurveKind::Constant, *v};
    }
    throw ValidationError("unknown coefficient curve '" + text + "'");
}

void SyntheticScenario::validate() const {
    if (n == 0) throw ValidationError("scenario: n must be positive");
    if (p == 0) throw ValidationError("scenario: p must be positive");
    for (const auto& [j, curve] : active)
        if (j >= p) throw ValidationError("scenario: active index " + std::to_string(j + 1) + " exceeds p");
    if (!(noise_sd >= 0.0)) throw ValidationError("scenario: noise_sd must be nonnegative");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw ValidationError("scenario: missing_rate must lie in [0,1)");
    if (schedule == ScheduleLaw::Grid) {
        if (grid_times.empty()) throw ValidationError("scenario: empty visit grid");
        for (std::size_t k = 0; k < grid_times.size(); ++k) {
            if (!(grid_times[k] >= 0.0 && grid_times[k] < 1.0))
                throw ValidationError("scenario: grid times must lie in [0,1)");
            if (k > 0 && !(grid_times[k] > grid_times[k - 1]))
                throw ValidationError("scenario: grid times must be strictly increasing");
        }
        if (!visit_mix.empty()) {
            if (mix_min_visits == 0 || mix_min_visits + visit_mix.size() - 1 > grid_times.size())
                throw ValidationError("scenario: visit_mix bins exceed the number of grid times");
            for (double w : visit_mix)
                if (!(w >= 0.0)) throw ValidationError("scenario: visit_mix weights must be nonnegative");
            if (std::accumulate(visit_mix.begin(), visit_mix.end(), 0.0) <= 0.0)
                throw ValidationError("scenario: visit_mix weights sum to zero");
        }
    } else {
        if (m_min == 0 || m_min > m_max) throw ValidationError("scenario: need 1 <= m_min <= m_max");
    }
}

SyntheticScenario standard_scenario() {
    SyntheticScenario s;
    s.active = {{0, {CurveKind::Sin2Pi, 0.0}},
                {1, {CurveKind::Linear, 0.0}},
                {2, {CurveKind::Quadratic, 0.0}},
                {3, {CurveKind::Constant, 0.8}}};
    return s;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_real(const std::string& key, const std::string& v) {
    auto r = parse_real(v);
    if (!r) throw ValidationError("scenario: '" + key + "' expects a number, got '" + v + "'");
    return *r;
}

std::size_t to_count(const std::string& key, const std::string& v) {
    const double r = to_real(key, v);
    if (r < 0 || r != std::floor(r)) throw ValidationError("scenario: '" + key + "' expects a nonnegative integer");
    return static_cast<std::size_t>(r);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("scenario: '" + key + "' expects true/false");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split(v, ',')) out.push_back(to_real(key, item));
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_real(v[i]);
    return out;
}

}  // namespace

SyntheticScenario read_scenario(std::istream& in) {
    SyntheticScenario s;
    std::string line;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("scenario line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw ValidationError("scenario: duplicate key '" + key + "'");

        if (key == "n") s.n = to_count(key, val);
        else if (key == "p") s.p = to_count(key, val);
        else if (key == "active") {
            s.active.clear();
            for (const auto& item : split(val, ',')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw ValidationError("scenario: active entries look like '<index>:<curve>'");
                const std::size_t idx = to_count(key, item.substr(0, colon));
                if (idx == 0) throw ValidationError("scenario: active indices are 1-based");
                if (!s.active.emplace(idx - 1, CoefficientCurve::parse(trim(item.substr(colon + 1)))).second)
                    throw ValidationError("scenario: covariate " + std::to_string(idx) + " listed twice in active");
            }
        } else if (key == "intercept") s.intercept = to_real(key, val);
        else if (key == "noise_sd") s.noise_sd = to_real(key, val);
        else if (key == "schedule") {
            if (val == "grid") s.schedule = ScheduleLaw::Grid;
            else if (val == "uniform") s.schedule = ScheduleLaw::Uniform;
            else throw ValidationError("scenario: schedule must be grid or uniform");
        } else if (key == "grid_times") s.grid_times = to_list(key, val);
        else if (key == "visit_mix") s.visit_mix = val == "none" ? std::vector<double>{} : to_list(key, val);
        else if (key == "mix_min_visits") s.mix_min_visits = to_count(key, val);
        else if (key == "horizon_visit") s.horizon_visit = to_bool(key, val);
        else if (key == "m_min") s.m_min = to_count(key, val);
        else if (key == "m_max") s.m_max = to_count(key, val);
        else if (key == "missing_rate") s.missing_rate = to_real(key, val);
        else if (key == "covariate_law") {
            if (val == "iid") s.covariate_law = CovariateLaw::Iid;
            else if (val == "smooth") s.covariate_law = CovariateLaw::Smooth;
            else throw ValidationError("scenario: covariate_law must be iid or smooth");
        } else if (key == "covariate_drop_fraction") s.policy.covariate_drop_fraction = to_real(key, val);
        else if (key == "visit_rule") s.policy.visit_rule = parse_visit_rule(val);
        else if (key == "seed") s.seed = static_cast<std::uint64_t>(to_count(key, val));
        else throw ValidationError("scenario: unknown key '" + key + "'");
    }
    s.validate();
    return s;
}

SyntheticScenario read_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file '" + path.string() + "'");
    return read_scenario(in);
}

void write_scenario(const SyntheticScenario& s, std::ostream& out) {
    out << "n = " << s.n << "\np = " << s.p << "\nactive = ";
    bool first = true;
    for (const auto& [j, c] : s.active) {
        out << (first ? "" : ",") << j + 1 << ':' << c.name();
        first = false;
    }
    out << "\nintercept = " << format_real(s.intercept) << "\nnoise_sd = " << format_real(s.noise_sd)
        << "\nschedule = " << (s.schedule == ScheduleLaw::Grid ? "grid" : "uniform")
        << "\ngrid_times = " << join(s.grid_times)
        << "\nvisit_mix = " << (s.visit_mix.empty() ? std::string("none") : join(s.visit_mix))
        << "\nmix_min_visits = " << s.mix_min_visits << "\nhorizon_visit = " << (s.horizon_visit ? "true" : "false")
        << "\nm_min = " << s.m_min << "\nm_max = " << s.m_max << "\nmissing_rate = " << format_real(s.missing_rate)
        << "\ncovariate_law = " << (s.covariate_law == CovariateLaw::Iid ? "iid" : "smooth")
        << "\ncovariate_drop_fraction = " << format_real(s.policy.covariate_drop_fraction)
        << "\nvisit_rule = " << to_string(s.policy.visit_rule) << "\nseed = " << s.seed << '\n';
}

std::vector<std::size_t> allocate_counts(const std::vector<double>& weights, std::size_t n) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double exact = static_cast<double>(n) * weights[k] / total;
        counts[k] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[remainders[r % remainders.size()].second];
    return counts;
}

SyntheticCohort generate(const SyntheticScenario& sc) {
    sc.validate();
    std::mt19937_64 rng(sc.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Visit times per subject.
    std::vector<std::vector<double>> times(sc.n);
    if (sc.schedule == ScheduleLaw::Grid) {
        std::vector<std::size_t> visit_counts;
        if (sc.visit_mix.empty()) {
            visit_counts.assign(sc.n, sc.grid_times.size());
        } else {
            const auto counts = allocate_counts(sc.visit_mix, sc.n);
            for (std::size_t k = 0; k < counts.size(); ++k)
                visit_counts.insert(visit_counts.end(), counts[k], sc.mix_min_visits + k);
            std::shuffle(visit_counts.begin(), visit_counts.end(), rng);
        }
        for (std::size_t i = 0; i < sc.n; ++i) {
            std::vector<std::size_t> slots(sc.grid_times.size());
            std::iota(slots.begin(), slots.end(), std::size_t{0});
            std::shuffle(slots.begin(), slots.end(), rng);
            slots.resize(visit_counts[i]);
            std::sort(slots.begin(), slots.end());
            for (auto k : slots) times[i].push_back(sc.grid_times[k]);
        }
    } else {
        std::uniform_int_distribution<std::size_t> count(sc.m_min, sc.m_max);
        for (std::size_t i = 0; i < sc.n; ++i) {
            const std::size_t m = count(rng);
            std::set<double> ts;
            while (ts.size() < m) ts.insert(unit(rng));
            times[i].assign(ts.begin(), ts.end());
        }
    }
    if (sc.horizon_visit)
        for (auto& t : times) t.push_back(1.0);

    GroundTruth truth;
    truth.b = sc.intercept;
    truth.noise_sd = sc.noise_sd;
    truth.curves.assign(sc.p, CoefficientCurve{});
    for (const auto& [j, curve] : sc.active) {
        truth.curves[j] = curve;
        truth.active.push_back(j);
    }

    const int width = static_cast<int>(std::to_string(sc.n).size());
    std::vector<std::string> names;
    for (std::size_t j = 0; j < sc.p; ++j) names.push_back("x" + std::to_string(j + 1));

    std::map<std::pair<std::string, double>, double> noiseless;
    std::vector<Subject> subjects;
    for (std::size_t i = 0; i < sc.n; ++i) {
        std::ostringstream id;
        id << 'S' << std::setw(width) << std::setfill('0') << i + 1;
        Subject subj{id.str(), {}};

        // Smooth law: x_ij(t) = a + amp sin(2 pi f t + phase), bounded in [-1, 1].
        std::vector<std::array<double, 4>> traj(sc.p);
        if (sc.covariate_law == CovariateLaw::Smooth)
            for (auto& c : traj)
                c = {unit(rng) - 0.5, 0.5 * unit(rng), 0.5 + unit(rng), 2.0 * std::numbers::pi * unit(rng)};

        for (double t : times[i]) {
            Visit v{t, 0.0, {}};
            std::vector<double> x(sc.p);
            for (std::size_t j = 0; j < sc.p; ++j) {
                if (sc.covariate_law == CovariateLaw::Iid) {
                    x[j] = 2.0 * unit(rng) - 1.0;
                } else {
                    const auto& c = traj[j];
                    x[j] = c[0] + c[1] * std::sin(2.0 * std::numbers::pi * c[2] * t + c[3]);
                }
            }
            double mean = truth.b;
            for (const auto& [j, curve] : sc.active) mean += curve(t) * x[j];
            const double eps = normal(rng);
            v.response = mean + sc.noise_sd * eps;
            for (std::size_t j = 0; j < sc.p; ++j) {
                const bool drop = sc.missing_rate > 0.0 && unit(rng) < sc.missing_rate;
                v.covariates.emplace_back(drop ? std::nullopt : std::optional<double>(x[j]));
            }
            noiseless[{subj.id, t}] = mean;
            subj.visits.push_back(std::move(v));
        }
        subjects.push_back(std::move(subj));
    }

    LongitudinalDataset raw(std::move(subjects), names, 1.0);
    SyntheticCohort out{apply_missing_policy(raw, sc.policy), std::move(truth)};

    // The policy may drop or impute covariates; remap truth to the surviving columns.
    if (out.dataset.p() != sc.p) {
        std::vector<CoefficientCurve> curves;
        std::vector<std::size_t> active;
        for (std::size_t k = 0; k < out.dataset.p(); ++k) {
            const auto pos = std::find(names.begin(), names.end(), out.dataset.covariate_names()[k]) - names.begin();
            curves.push_back(out.truth.curves[static_cast<std::size_t>(pos)]);
            if (sc.active.count(static_cast<std::size_t>(pos))) active.push_back(k);
        }
        out.truth.curves = std::move(curves);
        out.truth.active = std::move(active);
    }
    out.truth.noiseless.resize(static_cast<Eigen::Index>(out.dataset.N()));
    Eigen::Index a = 0;
    for (const auto& s : out.dataset.subjects())
        for (const auto& v : s.visits) out.truth.noiseless(a++) = noiseless.at({s.id, v.time});
    return out;
}

}  // namespace vcsel
