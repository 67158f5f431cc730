#include "vcsel/dataset.hpp"

#include "vcsel/error.hpp"
#include "vcsel/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace vcsel {

VisitRule parse_visit_rule(const std::string& name) {
    if (name == "drop-incomplete-visit") return VisitRule::DropIncompleteVisit;
    if (name == "impute-subject-mean") return VisitRule::ImputeSubjectMean;
    if (name == "impute-cohort-mean") return VisitRule::ImputeCohortMean;
    throw ValidationError("unknown visit rule '" + name + "'");
}

std::string to_string(VisitRule rule) {
    switch (rule) {
        case VisitRule::DropIncompleteVisit: return "drop-incomplete-visit";
        case VisitRule::ImputeSubjectMean: return "impute-subject-mean";
        case VisitRule::ImputeCohortMean: return "impute-cohort-mean";
    }
    return "?";
}

LongitudinalDataset::LongitudinalDataset(std::vector<Subject> subjects,
                                         std::vector<std::string> covariate_names,
                                         double time_divisor)
    : subjects_(std::move(subjects)),
      covariate_names_(std::move(covariate_names)),
      time_divisor_(time_divisor) {
    if (subjects_.empty()) throw ValidationError("dataset has no subjects");
    if (covariate_names_.empty()) throw ValidationError("dataset has no covariates");
    if (!(time_divisor_ > 0.0)) throw ValidationError("time divisor must be positive");
    std::set<std::string> names(covariate_names_.begin(), covariate_names_.end());
    if (names.size() != covariate_names_.size()) throw ValidationError("covariate names are not unique");

    const std::size_t p = covariate_names_.size();
    for (const auto& s : subjects_) {
        if (s.visits.empty()) throw ValidationError("subject '" + s.id + "' has no visits");
        double prev = -1.0;
        for (const auto& v : s.visits) {
            if (!(v.time >= 0.0 && v.time <= 1.0))
                throw ValidationError("subject '" + s.id + "': time " + format_real(v.time) +
                                      " outside [0,1]");
            if (v.time < prev) throw ValidationError("subject '" + s.id + "': visits not sorted by time");
            if (v.covariates.size() != p)
                throw ValidationError("subject '" + s.id + "': visit carries " +
                                      std::to_string(v.covariates.size()) + " covariates, expected " +
                                      std::to_string(p));
            if (!std::isfinite(v.response)) throw ValidationError("subject '" + s.id + "': non-finite response");
            prev = v.time;
        }
        total_visits_ += s.visits.size();
    }
}

bool LongitudinalDataset::is_complete() const {
    for (const auto& s : subjects_)
        for (const auto& v : s.visits)
            for (const auto& x : v.covariates)
                if (!x) return false;
    return true;
}

Eigen::VectorXd LongitudinalDataset::responses() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(N()));
    Eigen::Index a = 0;
    for (const auto& s : subjects_)
        for (const auto& v : s.visits) y(a++) = v.response;
    return y;
}

Eigen::VectorXd LongitudinalDataset::times() const {
    Eigen::VectorXd t(static_cast<Eigen::Index>(N()));
    Eigen::Index a = 0;
    for (const auto& s : subjects_)
        for (const auto& v : s.visits) t(a++) = v.time;
    return t;
}

Eigen::MatrixXd LongitudinalDataset::design() const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(N()), static_cast<Eigen::Index>(p()));
    Eigen::Index a = 0;
    for (const auto& s : subjects_) {
        for (const auto& v : s.visits) {
            for (std::size_t j = 0; j < v.covariates.size(); ++j) {
                if (!v.covariates[j])
                    throw ValidationError("missing value for covariate '" + covariate_names_[j] +
                                          "' of subject '" + s.id + "'; apply a missing-value policy first");
                x(a, static_cast<Eigen::Index>(j)) = *v.covariates[j];
            }
            ++a;
        }
    }
    return x;
}

LongitudinalDataset LongitudinalDataset::with_provenance(std::vector<double> raw_missing_fraction,
                                                         std::vector<std::string> warnings) const {
    LongitudinalDataset out = *this;
    out.raw_missing_fraction_ = std::move(raw_missing_fraction);
    out.warnings_ = std::move(warnings);
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

namespace {

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

namespace {

struct RawRow {
    double time;
    std::optional<double> response;
    std::vector<std::optional<double>> covariates;
    std::size_t line;
};

}  // namespace

LongitudinalDataset read_csv(std::istream& in, const CsvSchema& schema, const MissingPolicy& policy,
                             std::optional<double> time_divisor) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!is_blank(line)) {
            header = split_csv_line(line);
            break;
        }
    }
    if (header.empty()) throw ValidationError("empty dataset: no header row");
    if (header.size() >= 1 && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

    auto find_col = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ValidationError("missing required column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t id_col = find_col(schema.subject_column);
    const std::size_t time_col = find_col(schema.time_column);
    const std::size_t resp_col = find_col(schema.response_column);

    std::vector<std::size_t> cov_cols;
    std::vector<std::string> cov_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == id_col || c == time_col || c == resp_col) continue;
        cov_cols.push_back(c);
        cov_names.push_back(header[c]);
    }
    if (cov_cols.empty()) throw ValidationError("no covariate columns");
    {
        std::set<std::string> uniq(cov_names.begin(), cov_names.end());
        if (uniq.size() != cov_names.size()) throw ValidationError("duplicate covariate column names");
    }

    std::map<std::string, std::vector<RawRow>> rows;
    std::size_t n_rows = 0;
    std::size_t n_missing_response = 0;
    double max_time = 0.0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        auto f = split_csv_line(line);
        auto malformed = [&](const std::string& why) {
            return ValidationError("malformed row at line " + std::to_string(line_no) + ": " + why);
        };
        if (f.size() != header.size())
            throw malformed("expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(f.size()));
        if (is_blank(f[id_col])) throw malformed("empty subject id");
        auto t = parse_real(f[time_col]);
        if (!t) throw malformed("time '" + f[time_col] + "' is not a number");
        if (!(*t >= 0.0) || !std::isfinite(*t)) throw malformed("negative or non-finite time");
        RawRow r{*t, std::nullopt, {}, line_no};
        if (!is_blank(f[resp_col])) {
            r.response = parse_real(f[resp_col]);
            if (!r.response || !std::isfinite(*r.response))
                throw malformed("response '" + f[resp_col] + "' is not a number");
        } else {
            ++n_missing_response;
        }
        r.covariates.reserve(cov_cols.size());
        for (std::size_t k = 0; k < cov_cols.size(); ++k) {
            const auto& cell = f[cov_cols[k]];
            if (is_blank(cell)) {
                r.covariates.emplace_back(std::nullopt);
                continue;
            }
            auto v = parse_real(cell);
            if (!v || !std::isfinite(*v)) throw malformed("covariate '" + cov_names[k] + "' value '" + cell + "'");
            r.covariates.emplace_back(*v);
        }
        max_time = std::max(max_time, *t);
        rows[f[id_col]].push_back(std::move(r));
        ++n_rows;
    }
    if (n_rows == 0) throw ValidationError("empty dataset: no data rows");
    if (n_missing_response == n_rows) throw ValidationError("all responses are missing");

    const double divisor = time_divisor ? *time_divisor : (max_time > 0.0 ? max_time : 1.0);
    if (!(divisor > 0.0)) throw ValidationError("time divisor must be positive");

    std::vector<std::string> warnings;
    std::vector<Subject> subjects;
    for (auto& [id, list] : rows) {
        std::stable_sort(list.begin(), list.end(), [](const RawRow& a, const RawRow& b) { return a.time < b.time; });
        for (std::size_t k = 1; k < list.size(); ++k)
            if (list[k].time == list[k - 1].time)
                throw ValidationError("duplicate (subject, time) pair for subject '" + id + "' at time " +
                                      format_real(list[k].time) + " (lines " + std::to_string(list[k - 1].line) +
                                      " and " + std::to_string(list[k].line) + ")");
        Subject s{id, {}};
        for (auto& r : list) {
            if (!r.response) continue;
            const double scaled = r.time / divisor;
            if (scaled > 1.0)
                throw ValidationError("line " + std::to_string(r.line) + ": time " + format_real(r.time) +
                                      " exceeds the time divisor " + format_real(divisor));
            s.visits.push_back(Visit{scaled, *r.response, std::move(r.covariates)});
        }
        if (s.visits.empty()) {
            warnings.push_back("subject '" + id + "' dropped: no visit with a response");
            continue;
        }
        subjects.push_back(std::move(s));
    }
    if (n_missing_response > 0)
        warnings.push_back(std::to_string(n_missing_response) + " visit(s) dropped for missing response");

    LongitudinalDataset raw(std::move(subjects), std::move(cov_names), divisor);
    auto out = apply_missing_policy(raw, policy);
    auto all_warnings = warnings;
    all_warnings.insert(all_warnings.end(), out.warnings().begin(), out.warnings().end());
    return out.with_provenance(out.raw_missing_fraction(), std::move(all_warnings));
}

LongitudinalDataset ingest_csv(const std::filesystem::path& path, const CsvSchema& schema,
                               const MissingPolicy& policy, std::optional<double> time_divisor) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open data file '" + path.string() + "'");
    return read_csv(in, schema, policy, time_divisor);
}

void write_csv(const LongitudinalDataset& ds, std::ostream& out) {
    out << "subject_id,time,response";
    for (const auto& name : ds.covariate_names()) out << ',' << quote_if_needed(name);
    out << '\n';
    for (const auto& s : ds.subjects()) {
        for (const auto& v : s.visits) {
            out << quote_if_needed(s.id) << ',' << format_real(v.time) << ',' << format_real(v.response);
            for (const auto& x : v.covariates) {
                out << ',';
                if (x) out << format_real(*x);
            }
            out << '\n';
        }
    }
}

void write_csv(const LongitudinalDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_csv(ds, out);
}

LongitudinalDataset apply_missing_policy(const LongitudinalDataset& ds, const MissingPolicy& policy) {
    if (!(policy.covariate_drop_fraction >= 0.0 && policy.covariate_drop_fraction <= 1.0))
        throw ValidationError("covariate_drop_fraction must lie in [0,1]");
    const std::size_t p = ds.p();
    const double total = static_cast<double>(ds.N());

    std::vector<std::size_t> missing(p, 0);
    std::vector<double> sum(p, 0.0);
    for (const auto& s : ds.subjects())
        for (const auto& v : s.visits)
            for (std::size_t j = 0; j < p; ++j) {
                if (v.covariates[j])
                    sum[j] += *v.covariates[j];
                else
                    ++missing[j];
            }

    std::vector<std::string> warnings = ds.warnings();
    std::vector<std::size_t> keep;
    std::vector<double> raw_fraction;
    for (std::size_t j = 0; j < p; ++j) {
        const double frac = static_cast<double>(missing[j]) / total;
        if (frac > policy.covariate_drop_fraction) {
            std::ostringstream msg;
            msg << std::fixed << std::setprecision(1) << "covariate '" << ds.covariate_names()[j]
                << "' dropped: " << 100.0 * frac << "% missing exceeds "
                << 100.0 * policy.covariate_drop_fraction << "%";
            warnings.push_back(msg.str());
            continue;
        }
        if (missing[j] == ds.N())
            throw ValidationError("covariate '" + ds.covariate_names()[j] + "' has no observed values");
        keep.push_back(j);
        raw_fraction.push_back(frac);
    }
    if (keep.empty()) throw ValidationError("every covariate exceeded the missingness threshold");

    std::vector<double> cohort_mean(p, 0.0);
    for (std::size_t j = 0; j < p; ++j)
        if (missing[j] < ds.N()) cohort_mean[j] = sum[j] / static_cast<double>(ds.N() - missing[j]);

    std::vector<std::string> names;
    for (auto j : keep) names.push_back(ds.covariate_names()[j]);

    std::size_t dropped_visits = 0;
    std::vector<Subject> subjects;
    for (const auto& s : ds.subjects()) {
        std::vector<double> subj_mean(p, 0.0);
        std::vector<std::size_t> subj_count(p, 0);
        for (const auto& v : s.visits)
            for (std::size_t j = 0; j < p; ++j)
                if (v.covariates[j]) {
                    subj_mean[j] += *v.covariates[j];
                    ++subj_count[j];
                }
        Subject out{s.id, {}};
        for (const auto& v : s.visits) {
            Visit nv{v.time, v.response, {}};
            bool incomplete = false;
            for (auto j : keep) {
                if (v.covariates[j]) {
                    nv.covariates.emplace_back(*v.covariates[j]);
                    continue;
                }
                incomplete = true;
                switch (policy.visit_rule) {
                    case VisitRule::DropIncompleteVisit: nv.covariates.emplace_back(std::nullopt); break;
                    case VisitRule::ImputeSubjectMean:
                        nv.covariates.emplace_back(subj_count[j] > 0 ? subj_mean[j] / static_cast<double>(subj_count[j])
                                                                     : cohort_mean[j]);
                        break;
                    case VisitRule::ImputeCohortMean: nv.covariates.emplace_back(cohort_mean[j]); break;
                }
            }
            if (incomplete && policy.visit_rule == VisitRule::DropIncompleteVisit) {
                ++dropped_visits;
                continue;
            }
            out.visits.push_back(std::move(nv));
        }
        if (out.visits.empty()) {
            warnings.push_back("subject '" + s.id + "' dropped: no complete visit");
            continue;
        }
        subjects.push_back(std::move(out));
    }
    if (dropped_visits > 0)
        warnings.push_back(std::to_string(dropped_visits) + " incomplete visit(s) dropped");
    if (subjects.empty()) throw ValidationError("empty dataset after missing-value policy");

    LongitudinalDataset result(std::move(subjects), std::move(names), ds.time_divisor());
    return result.with_provenance(std::move(raw_fraction), std::move(warnings));
}

CohortSummary summarize(const LongitudinalDataset& ds) {
    CohortSummary s;
    s.n = ds.n();
    s.p = ds.p();
    s.N = ds.N();
    for (const auto& subj : ds.subjects()) ++s.visit_histogram[subj.visits.size()];

    std::vector<std::size_t> miss(ds.p(), 0);
    for (const auto& subj : ds.subjects())
        for (const auto& v : subj.visits)
            for (std::size_t j = 0; j < ds.p(); ++j)
                if (!v.covariates[j]) ++miss[j];
    for (std::size_t j = 0; j < ds.p(); ++j) {
        double frac = j < ds.raw_missing_fraction().size()
                          ? ds.raw_missing_fraction()[j]
                          : static_cast<double>(miss[j]) / static_cast<double>(ds.N());
        s.missingness.emplace_back(ds.covariate_names()[j], frac);
    }

    const Eigen::VectorXd y = ds.responses();
    s.response_mean = y.mean();
    s.response_sd = y.size() > 1 ? std::sqrt((y.array() - s.response_mean).square().sum() /
                                             static_cast<double>(y.size() - 1))
                                 : 0.0;
    return s;
}

std::map<std::size_t, std::size_t> pooled_histogram(const CohortSummary& s, std::size_t floor) {
    std::map<std::size_t, std::size_t> out;
    for (auto [m, count] : s.visit_histogram) out[std::max(m, floor)] += count;
    return out;
}

void write_summary_text(const CohortSummary& s, std::ostream& out) {
    out << "subjects (n)        " << s.n << '\n'
        << "covariates (p)      " << s.p << '\n'
        << "visits (N)          " << s.N << '\n'
        << "response mean       " << format_real(s.response_mean) << '\n'
        << "response sd         " << format_real(s.response_sd) << '\n'
        << "\nvisits per subject\n";
    for (auto [m, count] : s.visit_histogram) out << "  " << std::setw(4) << m << "  " << count << '\n';
    out << "\nmissingness before policy\n";
    for (const auto& [name, frac] : s.missingness)
        out << "  " << name << "  " << std::fixed << std::setprecision(4) << frac << std::defaultfloat << '\n';
}

void write_summary_csv(const CohortSummary& s, std::ostream& out) {
    out << "section,key,value\n";
    out << "cohort,n," << s.n << "\ncohort,p," << s.p << "\ncohort,N," << s.N << '\n';
    out << "cohort,response_mean," << format_real(s.response_mean) << '\n';
    out << "cohort,response_sd," << format_real(s.response_sd) << '\n';
    for (auto [m, count] : s.visit_histogram) out << "visits," << m << ',' << count << '\n';
    for (const auto& [name, frac] : s.missingness)
        out << "missing," << quote_if_needed(name) << ',' << format_real(frac) << '\n';
}

LongitudinalDataset restrict_waves(const LongitudinalDataset& ds, double max_time) {
    if (!(max_time > 0.0 && max_time <= 1.0)) throw ValidationError("max_time must lie in (0, 1]");
    std::vector<Subject> kept;
    for (const auto& s : ds.subjects()) {
        Subject out{s.id, {}};
        for (const auto& v : s.visits)
            if (v.time <= max_time) out.visits.push_back(v);
        if (!out.visits.empty()) kept.push_back(std::move(out));
    }
    if (kept.empty()) throw ValidationError("no visit at or before time " + format_real(max_time));
    LongitudinalDataset out(std::move(kept), ds.covariate_names(), ds.time_divisor());
    return out.with_provenance(ds.raw_missing_fraction(), ds.warnings());
}

LongitudinalDataset subset_subjects(const LongitudinalDataset& ds, std::span<const std::size_t> indices) {
    std::vector<Subject> picked;
    picked.reserve(indices.size());
    for (auto i : indices) {
        if (i >= ds.n()) throw ValidationError("subject index out of range");
        picked.push_back(ds.subjects()[i]);
    }
    LongitudinalDataset out(std::move(picked), ds.covariate_names(), ds.time_divisor());
    return out.with_provenance(ds.raw_missing_fraction(), {});
}

}  // namespace vcsel
