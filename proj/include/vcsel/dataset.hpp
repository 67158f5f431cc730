#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vcsel {

struct Visit {
    double time = 0.0;  // scaled to [0, 1]
    double response = 0.0;
    std::vector<std::optional<double>> covariates;  // nullopt = missing
};

struct Subject {
    std::string id;
    std::vector<Visit> visits;  // sorted by time
};

enum class VisitRule { DropIncompleteVisit, ImputeSubjectMean, ImputeCohortMean };

struct MissingPolicy {
    double covariate_drop_fraction = 0.2;
    VisitRule visit_rule = VisitRule::ImputeSubjectMean;
};

VisitRule parse_visit_rule(const std::string& name);
std::string to_string(VisitRule rule);

/// Ragged longitudinal cohort: n subjects, m_i visits each, p covariates per visit.
///
/// Immutable after construction. The constructor enforces the structural
/// invariants (sorted visits, times in [0,1], p slots per visit, unique
/// covariate names, no empty subjects); missing covariate values are allowed
/// until a MissingPolicy has been applied, see `is_complete()`.
class LongitudinalDataset {
public:
    LongitudinalDataset() = default;
    LongitudinalDataset(std::vector<Subject> subjects, std::vector<std::string> covariate_names,
                        double time_divisor = 1.0);

    const std::vector<Subject>& subjects() const { return subjects_; }
    const std::vector<std::string>& covariate_names() const { return covariate_names_; }
    double time_divisor() const { return time_divisor_; }

    std::size_t n() const { return subjects_.size(); }
    std::size_t p() const { return covariate_names_.size(); }
    std::size_t N() const { return total_visits_; }

    bool is_complete() const;

    /// Visit-major enumeration (subject-major, time-minor), length N.
    Eigen::VectorXd responses() const;
    Eigen::VectorXd times() const;
    /// N x p covariate values; throws ValidationError if any entry is missing.
    Eigen::MatrixXd design() const;

    /// Missingness per covariate before the policy ran (empty if never ingested).
    const std::vector<double>& raw_missing_fraction() const { return raw_missing_fraction_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    LongitudinalDataset with_provenance(std::vector<double> raw_missing_fraction,
                                        std::vector<std::string> warnings) const;

private:
    std::vector<Subject> subjects_;
    std::vector<std::string> covariate_names_;
    double time_divisor_ = 1.0;
    std::size_t total_visits_ = 0;
    std::vector<double> raw_missing_fraction_;
    std::vector<std::string> warnings_;
};

/// One CSV record split on commas, honouring double quotes.
std::vector<std::string> split_csv_line(const std::string& line);
std::string quote_if_needed(const std::string& field);

struct CsvSchema {
    std::string subject_column = "subject_id";
    std::string time_column = "time";
    std::string response_column = "response";
};

/// Reads the long-format CSV (one row per visit). Times are divided by
/// `time_divisor`, or by the largest raw time when none is given. Subjects
/// come out sorted by id, visits by time, and `policy` has been applied.
LongitudinalDataset ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {},
                               const MissingPolicy& policy = {},
                               std::optional<double> time_divisor = std::nullopt);
LongitudinalDataset read_csv(std::istream& in, const CsvSchema& schema = {},
                             const MissingPolicy& policy = {},
                             std::optional<double> time_divisor = std::nullopt);

/// Writes scaled times; re-ingesting with divisor 1 reproduces the dataset bit for bit.
void write_csv(const LongitudinalDataset& ds, std::ostream& out);
void write_csv(const LongitudinalDataset& ds, const std::filesystem::path& path);

LongitudinalDataset apply_missing_policy(const LongitudinalDataset& ds, const MissingPolicy& policy);

struct CohortSummary {
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t N = 0;
    std::map<std::size_t, std::size_t> visit_histogram;  // m_i -> subject count
    std::vector<std::pair<std::string, double>> missingness;
    double response_mean = 0.0;
    double response_sd = 0.0;
};

CohortSummary summarize(const LongitudinalDataset& ds);

/// Histogram with every count at or below `floor` pooled into the `floor` bin.
std::map<std::size_t, std::size_t> pooled_histogram(const CohortSummary& s, std::size_t floor);

void write_summary_text(const CohortSummary& s, std::ostream& out);
void write_summary_csv(const CohortSummary& s, std::ostream& out);

/// Keeps visits with time <= max_time and drops subjects left empty.
LongitudinalDataset restrict_waves(const LongitudinalDataset& ds, double max_time);

/// New dataset holding the given subjects in the given order.
LongitudinalDataset subset_subjects(const LongitudinalDataset& ds, std::span<const std::size_t> indices);

}  // namespace vcsel
