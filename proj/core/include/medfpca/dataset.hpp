#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace medfpca {

/// One measurement: normalized study time in [0,1] and a finite value.
struct Observation {
  double time = 0.0;
  double value = 0.0;
};

/// One study subject with irregular mediator/outcome grids and step-function
/// covariates. Covariates are stored per covariate name (dataset order) as
/// sorted (time, value) measurements and carried forward between rows.
struct Subject {
  std::string id;
  int treatment = 0;  // 0/1
  std::vector<Observation> mediator_obs;  // sorted strictly increasing in time
  std::vector<Observation> outcome_obs;   // sorted strictly increasing in time
  std::vector<std::vector<Observation>> covariate_steps;  // [name][measurement]

  int covariate_dim() const { return static_cast<int>(covariate_steps.size()); }

  /// Covariate vector at time t: for each name, the latest measurement at or
  /// before t. Throws DataError if some covariate has no measurement by t.
  Eigen::VectorXd covariates_at(double t) const;
};

/// Immutable after construction; safe to share across concurrent chains.
///
/// The per-arm size invariant (>= 2 subjects in each treatment arm) is
/// enforced where a fit begins, not at ingestion, so that validate_dataset
/// can still describe degenerate files (e.g. an all-control arm) instead of
/// refusing to look at them.
struct LongitudinalDataset {
  std::vector<Subject> subjects;
  std::vector<std::string> covariate_names;  // shared ordering, size p
  double horizon = 1.0;      // normalized; >= max observation time
  double time_scale = 1.0;   // original-units max time; multiply to report

  int covariate_dim() const { return static_cast<int>(covariate_names.size()); }
  int num_subjects() const { return static_cast<int>(subjects.size()); }
  int num_treated() const;
  int num_control() const;
  std::size_t total_mediator_obs() const;
  std::size_t total_outcome_obs() const;
};

/// Column-name map for load_dataset; defaults match the canonical layout.
struct ColumnMap {
  std::string subject_id = "subject_id";
  std::string treatment = "treatment";
  std::string role = "role";
  std::string time = "time";
  std::string name = "name";
  std::string value = "value";
};

/// Ingestion side report: duplicate-collapse warnings etc.
struct LoadReport {
  std::vector<std::string> warnings;
  int collapsed_duplicates = 0;
};

/// Loads the canonical long-format CSV (header required; columns per
/// ColumnMap; role in {mediator, outcome, covariate}). Times are rescaled to
/// [0,1] by the max observed time, which is recorded in
/// LongitudinalDataset::time_scale. Duplicated (subject, role, time, name)
/// rows are averaged with a warning. Throws DataError on schema problems,
/// unparseable or non-finite fields (with row number), subjects without
/// mediator observations, or covariate gaps.
LongitudinalDataset load_dataset(const std::string& path,
                                 const ColumnMap& schema = {},
                                 LoadReport* report = nullptr);

/// Writes the canonical long-format CSV with times in original units
/// (normalized time * time_scale). Round-trips through load_dataset up to
/// row order and the recorded scale.
void write_dataset(const LongitudinalDataset& d, const std::string& path);

struct ValidationReport {
  struct SubjectSummary {
    std::string id;
    int treatment = 0;
    int n_mediator = 0;
    int n_outcome = 0;
    int n_covariate_rows = 0;
  };
  std::vector<SubjectSummary> subjects;
  int n_treated = 0;
  int n_control = 0;
  int covariate_dim = 0;
  std::vector<std::string> warnings;  // e.g. sparse subjects (< 3 mediator obs)
  std::vector<std::string> fatal;     // e.g. "no treated subjects"

  bool ok() const { return fatal.empty(); }
  std::string to_string() const;
};

/// Report-only structural check: per-subject counts, arm sizes, covariate
/// completeness; subjects with < 3 mediator observations become warnings;
/// arm-size violations become fatal flags.
ValidationReport validate_dataset(const LongitudinalDataset& d);

/// Throws DataError unless both treatment arms have >= 2 subjects. Called by
/// the samplers before fitting.
void require_arm_sizes(const LongitudinalDataset& d);

}  // namespace medfpca
