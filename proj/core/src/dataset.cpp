#include "medfpca/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "medfpca/errors.hpp"

namespace medfpca {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, std::size_t row,
                    const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
    return v;
  } catch (const std::exception&) {
    std::ostringstream msg;
    msg << "row " << row << ": cannot parse column '" << col << "' value '"
        << s << "' as a finite number";
    throw DataError(msg.str());
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct RawRow {
  std::string subject;
  int treatment;
  std::string role;
  double time;
  std::string name;
  double value;
  std::size_t row_number;
};

}  // namespace

Eigen::VectorXd Subject::covariates_at(double t) const {
  Eigen::VectorXd x(covariate_dim());
  for (int k = 0; k < covariate_dim(); ++k) {
    const auto& steps = covariate_steps[static_cast<std::size_t>(k)];
    // latest measurement at or before t (step-function carry-forward)
    const Observation* latest = nullptr;
    for (const auto& o : steps) {
      if (o.time <= t)
        latest = &o;
      else
        break;
    }
    if (latest == nullptr) {
      std::ostringstream msg;
      msg << "subject " << id << ": covariate " << k << " has no measurement "
          << "at or before time " << t;
      throw DataError(msg.str());
    }
    x[k] = latest->value;
  }
  return x;
}

int LongitudinalDataset::num_treated() const {
  int n = 0;
  for (const auto& s : subjects) n += (s.treatment == 1);
  return n;
}

int LongitudinalDataset::num_control() const {
  return num_subjects() - num_treated();
}

std::size_t LongitudinalDataset::total_mediator_obs() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.mediator_obs.size();
  return n;
}

std::size_t LongitudinalDataset::total_outcome_obs() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.outcome_obs.size();
  return n;
}

LongitudinalDataset load_dataset(const std::string& path,
                                 const ColumnMap& schema, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);
  const auto header = split_csv_line(line);
  auto col_index = [&](const std::string& want) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == want) return static_cast<long>(i);
    throw DataError("missing column '" + want + "' in " + path);
  };
  const long c_subj = col_index(schema.subject_id);
  const long c_trt = col_index(schema.treatment);
  const long c_role = col_index(schema.role);
  const long c_time = col_index(schema.time);
  const long c_name = col_index(schema.name);
  const long c_val = col_index(schema.value);
  const std::size_t min_cols = static_cast<std::size_t>(std::max(
      {c_subj, c_trt, c_role, c_time, c_name, c_val})) + 1;

  std::vector<RawRow> rows;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < min_cols) {
      std::ostringstream msg;
      msg << "row " << row_number << ": expected at least " << min_cols
          << " columns, got " << f.size();
      throw DataError(msg.str());
    }
    RawRow r;
    r.row_number = row_number;
    r.subject = f[static_cast<std::size_t>(c_subj)];
    if (r.subject.empty()) {
      std::ostringstream msg;
      msg << "row " << row_number << ": empty subject_id";
      throw DataError(msg.str());
    }
    const double trt = parse_double(f[static_cast<std::size_t>(c_trt)],
                                    row_number, schema.treatment);
    if (trt != 0.0 && trt != 1.0) {
      std::ostringstream msg;
      msg << "row " << row_number << ": treatment must be 0 or 1, got " << trt;
      throw DataError(msg.str());
    }
    r.treatment = static_cast<int>(trt);
    r.role = f[static_cast<std::size_t>(c_role)];
    if (r.role != "mediator" && r.role != "outcome" && r.role != "covariate") {
      std::ostringstream msg;
      msg << "row " << row_number << ": role must be mediator|outcome|covariate"
          << ", got '" << r.role << "'";
      throw DataError(msg.str());
    }
    r.time = parse_double(f[static_cast<std::size_t>(c_time)], row_number,
                          schema.time);
    if (r.time < 0.0) {
      std::ostringstream msg;
      msg << "row " << row_number << ": negative time " << r.time;
      throw DataError(msg.str());
    }
    r.name = f[static_cast<std::size_t>(c_name)];
    if (r.role == "covariate" && r.name.empty()) {
      std::ostringstream msg;
      msg << "row " << row_number << ": covariate row with empty name";
      throw DataError(msg.str());
    }
    r.value = parse_double(f[static_cast<std::size_t>(c_val)], row_number,
                           schema.value);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("dataset has a header but no rows: " + path);

  // Time normalization: divide by the max observed time across all rows.
  double max_time = 0.0;
  for (const auto& r : rows) max_time = std::max(max_time, r.time);
  const double scale = max_time > 0.0 ? max_time : 1.0;

  // Group rows by subject (first-appearance order), collapsing duplicates.
  std::vector<std::string> subject_order;
  std::map<std::string, std::size_t> subject_index;
  struct Cell {
    double sum = 0.0;
    int count = 0;
  };
  // per subject: role/name keyed accumulation at each time
  struct Accum {
    int treatment = -1;
    std::map<double, Cell> mediator, outcome;
    std::map<std::string, std::map<double, Cell>> covariates;
  };
  std::vector<Accum> accums;
  std::vector<std::string> covariate_names;

  int duplicates = 0;
  for (const auto& r : rows) {
    auto it = subject_index.find(r.subject);
    if (it == subject_index.end()) {
      subject_index.emplace(r.subject, accums.size());
      subject_order.push_back(r.subject);
      accums.emplace_back();
      it = subject_index.find(r.subject);
    }
    Accum& a = accums[it->second];
    if (a.treatment == -1) {
      a.treatment = r.treatment;
    } else if (a.treatment != r.treatment) {
      std::ostringstream msg;
      msg << "row " << r.row_number << ": subject " << r.subject
          << " has inconsistent treatment values";
      throw DataError(msg.str());
    }
    const double t = r.time / scale;
    auto add = [&](std::map<double, Cell>& m) {
      Cell& c = m[t];
      if (c.count > 0) ++duplicates;
      c.sum += r.value;
      c.count += 1;
    };
    if (r.role == "mediator") {
      add(a.mediator);
    } else if (r.role == "outcome") {
      add(a.outcome);
    } else {
      if (std::find(covariate_names.begin(), covariate_names.end(), r.name) ==
          covariate_names.end())
        covariate_names.push_back(r.name);
      add(a.covariates[r.name]);
    }
  }
  std::sort(covariate_names.begin(), covariate_names.end());

  if (duplicates > 0 && report != nullptr) {
    std::ostringstream msg;
    msg << "collapsed " << duplicates
        << " duplicated (subject, role, time) rows by averaging";
    report->warnings.push_back(msg.str());
    report->collapsed_duplicates = duplicates;
  }

  LongitudinalDataset d;
  d.covariate_names = covariate_names;
  d.horizon = 1.0;
  d.time_scale = scale;
  for (std::size_t si = 0; si < subject_order.size(); ++si) {
    const Accum& a = accums[si];
    Subject s;
    s.id = subject_order[si];
    s.treatment = a.treatment;
    auto collect = [](const std::map<double, Cell>& m) {
      std::vector<Observation> out;
      out.reserve(m.size());
      for (const auto& [t, c] : m)
        out.push_back({t, c.sum / static_cast<double>(c.count)});
      return out;  // std::map keys already sorted strictly increasing
    };
    s.mediator_obs = collect(a.mediator);
    s.outcome_obs = collect(a.outcome);
    if (s.mediator_obs.empty())
      throw DataError("subject " + s.id + " has zero mediator observations");
    s.covariate_steps.resize(covariate_names.size());
    for (std::size_t k = 0; k < covariate_names.size(); ++k) {
      auto it = a.covariates.find(covariate_names[k]);
      if (it != a.covariates.end()) s.covariate_steps[k] = collect(it->second);
    }
    // Covariate completeness: every observation time must be covered by
    // every covariate name (carry-forward needs a row at or before it).
    if (!covariate_names.empty()) {
      for (const auto& obs_list : {s.mediator_obs, s.outcome_obs}) {
        for (const auto& o : obs_list) {
          for (std::size_t k = 0; k < covariate_names.size(); ++k) {
            const auto& steps = s.covariate_steps[k];
            if (steps.empty() || steps.front().time > o.time) {
              std::ostringstream msg;
              msg << "subject " << s.id << ": covariate '"
                  << covariate_names[k] << "' has no measurement at or before "
                  << "observation time " << o.time * scale;
              throw DataError(msg.str());
            }
          }
        }
      }
    }
    d.subjects.push_back(std::move(s));
  }
  return d;
}

void write_dataset(const LongitudinalDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out << "subject_id,treatment,role,time,name,value\n";
  for (const auto& s : d.subjects) {
    for (std::size_t k = 0; k < s.covariate_steps.size(); ++k) {
      for (const auto& o : s.covariate_steps[k]) {
        out << s.id << ',' << s.treatment << ",covariate,"
            << format_double(o.time * d.time_scale) << ','
            << d.covariate_names[k] << ',' << format_double(o.value) << '\n';
      }
    }
    for (const auto& o : s.mediator_obs)
      out << s.id << ',' << s.treatment << ",mediator,"
          << format_double(o.time * d.time_scale) << ",,"
          << format_double(o.value) << '\n';
    for (const auto& o : s.outcome_obs)
      out << s.id << ',' << s.treatment << ",outcome,"
          << format_double(o.time * d.time_scale) << ",,"
          << format_double(o.value) << '\n';
  }
  if (!out) throw DataError("failed writing dataset to " + path);
}

ValidationReport validate_dataset(const LongitudinalDataset& d) {
  ValidationReport rep;
  rep.covariate_dim = d.covariate_dim();
  for (const auto& s : d.subjects) {
    ValidationReport::SubjectSummary sum;
    sum.id = s.id;
    sum.treatment = s.treatment;
    sum.n_mediator = static_cast<int>(s.mediator_obs.size());
    sum.n_outcome = static_cast<int>(s.outcome_obs.size());
    for (const auto& steps : s.covariate_steps)
      sum.n_covariate_rows += static_cast<int>(steps.size());
    if (s.treatment == 1)
      ++rep.n_treated;
    else
      ++rep.n_control;
    if (sum.n_mediator < 3)
      rep.warnings.push_back("subject " + s.id + " has only " +
                             std::to_string(sum.n_mediator) +
                             " mediator observations (< 3)");
    rep.subjects.push_back(std::move(sum));
  }
  if (rep.n_treated == 0) rep.fatal.push_back("no treated subjects");
  if (rep.n_control == 0) rep.fatal.push_back("no control subjects");
  if (rep.n_treated == 1)
    rep.fatal.push_back("treated arm has fewer than 2 subjects");
  if (rep.n_control == 1)
    rep.fatal.push_back("control arm has fewer than 2 subjects");
  return rep;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  out << "subjects: " << subjects.size() << " (treated " << n_treated
      << ", control " << n_control << "), covariates: " << covariate_dim
      << "\n";
  std::size_t total_m = 0, total_y = 0;
  for (const auto& s : subjects) {
    total_m += static_cast<std::size_t>(s.n_mediator);
    total_y += static_cast<std::size_t>(s.n_outcome);
  }
  out << "observations: " << total_m << " mediator, " << total_y
      << " outcome\n";
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  for (const auto& f : fatal) out << "FATAL: " << f << "\n";
  if (fatal.empty() && warnings.empty()) out << "no issues found\n";
  return out.str();
}

void require_arm_sizes(const LongitudinalDataset& d) {
  if (d.num_treated() < 2 || d.num_control() < 2)
    throw DataError("dataset must have at least 2 subjects in each treatment "
                    "arm (treated: " + std::to_string(d.num_treated()) +
                    ", control: " + std::to_string(d.num_control()) + ")");
}

}  // namespace medfpca
