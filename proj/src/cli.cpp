#include "vcsel/cli.hpp"

#include "vcsel/dataset.hpp"
#include "vcsel/diagnostics.hpp"
#include "vcsel/error.hpp"
#include "vcsel/fit.hpp"
#include "vcsel/model.hpp"
#include "vcsel/numfmt.hpp"
#include "vcsel/predictor.hpp"
#include "vcsel/synth.hpp"
#include "vcsel/tuning.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace vcsel {

namespace {

struct Options {
    std::string data;
    std::string model;
    std::string out;
    std::string kernel = "sobolev1";
    double bandwidth = 0.1;
    std::vector<double> tau0_grid;
    std::optional<double> tau0;
    std::optional<double> M;
    std::vector<double> M_grid;
    std::optional<double> lambda;
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::optional<double> time_divisor;
    double drop_fraction = 0.2;
    std::string visit_rule = "impute-subject-mean";
    std::string scenario;
    std::vector<double> levels;
    std::size_t seeds = 20;
    std::string format = "text";
    bool print_config = false;
};

FitConfig fit_config(const Options& o) {
    FitConfig c;
    c.kernel.family = parse_kernel_family(o.kernel);
    c.kernel.bandwidth = o.bandwidth;
    c.kernel.validate();
    c.tau0 = o.tau0;
    c.tau0_grid = o.tau0_grid;
    c.M = o.M;
    c.lambda = o.lambda;
    return c;
}

MissingPolicy missing_policy(const Options& o) {
    if (!(o.drop_fraction >= 0.0 && o.drop_fraction <= 1.0))
        throw ValidationError("--drop-fraction must lie in [0, 1]");
    return {o.drop_fraction, parse_visit_rule(o.visit_rule)};
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    return f;
}

// Writes to --out when given, else to the command's stdout stream.
template <typename Fn>
void emit(const std::string& path, std::ostream& out, Fn&& fn) {
    if (path.empty()) {
        fn(out);
    } else {
        auto f = open_out(path);
        fn(f);
    }
}

void write_report(std::ostream& r, const LongitudinalDataset& ds, const FitResult& fit, const BoundingSetDiagnostics& d,
                  const std::optional<CvCurve>& cv) {
    const auto& m = fit.model;
    r << "subjects " << ds.n() << ", visits " << ds.N() << ", covariates " << ds.p() << '\n';
    r << "kernel " << to_string(m.kernel.family);
    if (m.kernel.family == KernelFamily::Gaussian) r << " (bandwidth " << format_real(m.kernel.bandwidth) << ')';
    r << '\n';
    r << "tau0 " << format_real(m.tau0) << (fit.gcv.grid.empty() ? " (fixed)" : " (GCV)") << '\n';
    r << "tau1 " << format_real(m.tau1) << '\n';
    if (cv) r << "M " << format_real(cv->chosen) << " (" << cv->errors.size() << "-point CV grid)\n";
    else if (m.config.M) r << "M " << format_real(*m.config.M) << " (fixed)\n";
    else if (m.config.lambda) r << "lambda " << format_real(*m.config.lambda) << " (fixed)\n";
    r << "intercept " << format_real(m.b) << '\n';
    r << "selected " << m.selected.size() << " of " << m.p() << '\n';
    const Eigen::VectorXd norms = m.component_norms();
    r << "covariate,theta,norm,selected\n";
    for (std::size_t j = 0; j < m.p(); ++j)
        r << m.covariate_names[j] << ',' << format_real(m.theta(static_cast<Eigen::Index>(j))) << ','
          << format_real(norms(static_cast<Eigen::Index>(j))) << ',' << (m.is_selected(j) ? 1 : 0) << '\n';
    r << "objective (theta-weighted) after steps 2,3,4: " << format_real(fit.aux_objective[0]) << ' '
      << format_real(fit.aux_objective[1]) << ' ' << format_real(fit.aux_objective[2]) << '\n';
    r << "bounding set: rho " << format_real(d.rho) << ", c_K " << format_real(d.c_K) << ", c_x " << format_real(d.c_x)
      << ", J " << format_real(d.J_hat) << ", lambda " << format_real(d.lambda) << ", |b| bound "
      << format_real(d.b_bound) << ", inside " << (d.in_omega ? "yes" : "no") << '\n';
    for (const auto& w : ds.warnings()) r << "warning: " << w << '\n';
    for (const auto& w : fit.warnings) r << "warning: " << w << '\n';
}

void cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.data.empty()) throw ValidationError("fit needs --data");
    const auto ds = ingest_csv(o.data, {}, missing_policy(o), o.time_divisor);
    for (const auto& w : ds.warnings()) err << "warning: " << w << '\n';
    const FitConfig config = fit_config(o);

    std::optional<CvCurve> cv;
    FitResult fit;
    if (config.M || config.lambda) {
        fit = fit_one_step(ds, config);
    } else {
        const auto grid = o.M_grid.empty() ? default_M_grid(ds.p()) : o.M_grid;
        cv = cross_validate_M(ds, config, grid, make_cv_plan(ds.n(), o.folds, o.seed), o.jobs);
        fit = OneStepFit(ds, config).finish_budget(cv->chosen);
    }
    const auto blocks = build_gram_blocks(config.kernel, ds);
    const auto diag = bounding_set_diagnostics(ds, blocks, fit.model, lambda_from_taus(fit.model.tau0, fit.model.tau1));

    const std::string path = o.out.empty() ? std::string("model.json") : o.out;
    write_model(fit.model, std::filesystem::path(path));
    {
        auto f = open_out(path + ".report.txt");
        write_report(f, ds, fit, diag, cv);
    }
    if (!fit.gcv.grid.empty()) {
        auto f = open_out(path + ".gcv.csv");
        write_gcv_csv(fit.gcv, f);
    }
    if (cv) {
        auto f = open_out(path + ".cv.csv");
        write_cv_csv(*cv, f);
    }
    for (const auto& w : fit.warnings) err << "warning: " << w << '\n';
    out << "selected";
    for (auto j : fit.model.selected) out << ' ' << fit.model.covariate_names[j];
    out << "\nmodel written to " << path << '\n';
}

void cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.model.empty()) throw ValidationError("predict needs --model");
    if (o.data.empty()) throw ValidationError("predict needs --data");
    const auto model = read_model(std::filesystem::path(o.model));
    std::ifstream in(o.data);
    if (!in) throw IoError("cannot open '" + o.data + "'");

    std::ostringstream buf;
    buf << "subject_id,time,y_true,y_pred\n";
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) == std::vector<std::string>{""}) {
        emit(o.out, out, [&](std::ostream& s) { s << buf.str(); });
        return;
    }
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
    for (const char* need : {"subject_id", "time"})
        if (!col.count(need)) throw ValidationError(std::string("query has no '") + need + "' column");
    for (auto j : model.selected)
        if (!col.count(model.covariate_names[j]))
            throw ValidationError("query lacks selected covariate '" + model.covariate_names[j] + "'");
    const auto response = col.find("response");
    const double divisor = o.time_divisor.value_or(model.time_divisor);

    std::size_t line_no = 1;
    bool warned = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw ValidationError("query line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields");
        const auto raw_t = parse_real(f[col["time"]]);
        if (!raw_t) throw ValidationError("query line " + std::to_string(line_no) + ": bad time");
        const double t = *raw_t / divisor;
        std::map<std::string, double> x;
        for (auto j : model.selected) {
            const auto& name = model.covariate_names[j];
            const auto v = parse_real(f[col[name]]);
            if (!v)
                throw ValidationError("query line " + std::to_string(line_no) + ": missing value for '" + name + "'");
            x[name] = *v;
        }
        if (!warned && beyond_training_range(model, t)) {
            err << "warning: query times extend beyond the training range\n";
            warned = true;
        }
        buf << quote_if_needed(f[col["subject_id"]]) << ',' << format_real(*raw_t) << ','
            << (response != col.end() ? f[response->second] : std::string()) << ','
            << format_real(predict_subject(model, x, t)) << '\n';
    }
    emit(o.out, out, [&](std::ostream& s) { s << buf.str(); });
}

SyntheticScenario load_scenario(const Options& o, bool seed_given) {
    SyntheticScenario sc = o.scenario.empty() ? standard_scenario() : read_scenario(std::filesystem::path(o.scenario));
    if (seed_given) sc.seed = o.seed;
    return sc;
}

void cmd_simulate(const Options& o, bool seed_given, std::ostream& out) {
    const auto cohort = generate(load_scenario(o, seed_given));
    emit(o.out, out, [&](std::ostream& s) { write_csv(cohort.dataset, s); });
}

void cmd_waves(const Options& o, std::ostream& out) {
    const SyntheticScenario sc = load_scenario(o, false);
    WavesOptions w;
    if (!o.levels.empty()) w.levels = o.levels;
    w.seeds = o.seeds;
    w.base_seed = o.seed;
    w.config = fit_config(o);
    w.M_grid = o.M_grid;
    w.folds = o.folds;
    w.jobs = o.jobs;
    const auto rows = waves_experiment(sc, w);
    emit(o.out, out, [&](std::ostream& s) { write_waves_csv(rows, s); });
}

void cmd_summarize(const Options& o, std::ostream& out) {
    if (o.data.empty()) throw ValidationError("summarize needs --data");
    const auto s = summarize(ingest_csv(o.data, {}, missing_policy(o), o.time_divisor));
    if (o.format != "text" && o.format != "csv") throw ValidationError("--format must be text or csv");
    emit(o.out, out, [&](std::ostream& f) {
        if (o.format == "csv") write_summary_csv(s, f);
        else write_summary_text(s, f);
    });
}

void add_fit_flags(CLI::App* c, Options& o) {
    c->add_option("--kernel", o.kernel, "sobolev1, cubic or gaussian")->capture_default_str();
    c->add_option("--bandwidth", o.bandwidth, "gaussian kernel bandwidth (scaled time)")->capture_default_str();
    c->add_option("--tau0-grid", o.tau0_grid, "comma-separated tau0 grid for GCV")->delimiter(',');
    c->add_option("--tau0", o.tau0, "fixed tau0 (skips GCV)");
    c->add_option("--M-grid", o.M_grid, "comma-separated budget grid for CV")->delimiter(',');
    c->add_option("--folds", o.folds, "cross-validation folds")->capture_default_str();
    c->add_option("--jobs", o.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_data_flags(CLI::App* c, Options& o) {
    c->add_option("--time-divisor", o.time_divisor, "raw time unit for scaling to [0,1]");
    c->add_option("--drop-fraction", o.drop_fraction, "drop covariates missing in more than this fraction")
        ->capture_default_str();
    c->add_option("--visit-rule", o.visit_rule,
                  "drop-incomplete-visit, impute-subject-mean or impute-cohort-mean")
        ->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Sparse varying-coefficient models for longitudinal data", "vcsel"};
    app.set_config("--config", "", "INI/TOML file mirroring the flags; flags win");
    app.add_flag("--print-config", o.print_config, "echo the resolved configuration");
    app.add_option("--seed", o.seed, "seed for every random choice")->capture_default_str();
    app.require_subcommand(1);
    app.fallthrough();

    auto* fit = app.add_subcommand("fit", "fit a model from a CSV");
    fit->add_option("--data", o.data, "long-format CSV")->required();
    fit->add_option("--out", o.out, "model file (default model.json)");
    fit->add_option("--M", o.M, "budget on sum(theta); CV over --M-grid when absent");
    fit->add_option("--lambda", o.lambda, "penalty on sum of component norms (instead of M)");
    add_fit_flags(fit, o);
    add_data_flags(fit, o);

    auto* predict = app.add_subcommand("predict", "predict from a fitted model");
    predict->add_option("--model", o.model, "model file")->required();
    predict->add_option("--data", o.data, "query CSV: subject_id, time, covariates")->required();
    predict->add_option("--out", o.out, "predictions CSV (default stdout)");
    predict->add_option("--time-divisor", o.time_divisor, "raw time unit (default: the model's)");

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic cohort");
    simulate->add_option("--scenario", o.scenario, "scenario file (default: standard scenario)");
    simulate->add_option("--out", o.out, "cohort CSV (default stdout)");

    auto* waves = app.add_subcommand("waves", "growing-waves prediction experiment");
    waves->add_option("--scenario", o.scenario, "scenario file (default: standard scenario)");
    waves->add_option("--levels", o.levels, "comma-separated max_time cutoffs")->delimiter(',');
    waves->add_option("--seeds", o.seeds, "replicates")->capture_default_str();
    waves->add_option("--out", o.out, "report CSV (default stdout)");
    add_fit_flags(waves, o);

    auto* summ = app.add_subcommand("summarize", "cohort summary");
    summ->add_option("--data", o.data, "long-format CSV")->required();
    summ->add_option("--out", o.out, "output file (default stdout)");
    summ->add_option("--format", o.format, "text or csv")->capture_default_str();
    add_data_flags(summ, o);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;
        err << "error: " << e.what() << '\n';
        if (dynamic_cast<const CLI::FileError*>(&e)) return 2;
        return 3;
    }

    try {
        if (o.print_config) out << app.config_to_str(true, false);
        const bool seed_given = app.count("--seed") > 0;
        if (*fit) cmd_fit(o, out, err);
        else if (*predict) cmd_predict(o, out, err);
        else if (*simulate) cmd_simulate(o, seed_given, out);
        else if (*waves) cmd_waves(o, out);
        else if (*summ) cmd_summarize(o, out);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::Numeric: return 1;
            case ErrorKind::Io: return 2;
            case ErrorKind::Validation: return 3;
        }
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace vcsel
