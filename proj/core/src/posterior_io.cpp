#include "medfpca/posterior_io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "medfpca/errors.hpp"
#include "medfpca/version.hpp"

namespace medfpca {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* flavor_name(PenaltyFlavor f) {
  return f == PenaltyFlavor::kCubic ? "cubic" : "quadratic";
}

PenaltyFlavor flavor_from_name(const std::string& s) {
  if (s == "cubic") return PenaltyFlavor::kCubic;
  if (s == "quadratic") return PenaltyFlavor::kQuadratic;
  throw DataError("unknown penalty flavor '" + s + "'");
}

const char* concurrent_name(ConcurrentPolicy p) {
  switch (p) {
    case ConcurrentPolicy::kSample: return "sample";
    case ConcurrentPolicy::kFixed: return "fixed";
    default: return "none";
  }
}

ConcurrentPolicy concurrent_from_name(const std::string& s) {
  if (s == "none") return ConcurrentPolicy::kNone;
  if (s == "sample") return ConcurrentPolicy::kSample;
  if (s == "fixed") return ConcurrentPolicy::kFixed;
  throw UsageError("unknown concurrent policy '" + s +
                   "' (expected none|sample|fixed)");
}

const char* draw_policy_name(MediatorDrawPolicy p) {
  switch (p) {
    case MediatorDrawPolicy::kCycle: return "cycle";
    case MediatorDrawPolicy::kRandom: return "random";
    default: return "mean";
  }
}

MediatorDrawPolicy draw_policy_from_name(const std::string& s) {
  if (s == "mean") return MediatorDrawPolicy::kMean;
  if (s == "cycle") return MediatorDrawPolicy::kCycle;
  if (s == "random") return MediatorDrawPolicy::kRandom;
  throw UsageError("unknown draw policy '" + s +
                   "' (expected mean|cycle|random)");
}

json config_to_json(const FpcaConfig& c) {
  return json{{"n_components", c.n_components},
              {"iterations", c.iterations},
              {"burn_in", c.burn_in},
              {"thin", c.thin},
              {"t_mix_df", c.t_mix_df},
              {"local_scale_floor", c.local_scale_floor},
              {"mh_proposal_sd", c.mh_proposal_sd},
              {"mh_adapt_interval", c.mh_adapt_interval},
              {"coef_prior_sd", c.coef_prior_sd},
              {"a_score1_prior_shape", c.a_score1_prior_shape},
              {"a_score2_prior_shape", c.a_score2_prior_shape},
              {"a_mean1_prior_shape", c.a_mean1_prior_shape},
              {"a_mean2_prior_shape", c.a_mean2_prior_shape},
              {"noise_prior_shape", c.noise_prior_shape},
              {"noise_prior_rate", c.noise_prior_rate},
              {"smooth_prec_upper", c.smooth_prec_upper},
              {"concurrent", concurrent_name(c.concurrent)},
              {"concurrent_fixed_value", c.concurrent_fixed_value},
              {"draw_policy", draw_policy_name(c.draw_policy)},
              {"normalize_components", c.normalize_components},
              {"fix_smooth_prec", c.fix_smooth_prec},
              {"penalty_ridge", c.penalty_ridge},
              {"check_invariants", c.check_invariants}};
}

FpcaConfig config_from_json(const json& j, FpcaConfig c) {
  if (!j.is_object())
    throw UsageError("sampler configuration must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "n_components") c.n_components = val.get<int>();
      else if (key == "iterations") c.iterations = val.get<int>();
      else if (key == "burn_in") c.burn_in = val.get<int>();
      else if (key == "thin") c.thin = val.get<int>();
      else if (key == "t_mix_df") c.t_mix_df = val.get<double>();
      else if (key == "local_scale_floor")
        c.local_scale_floor = val.get<double>();
      else if (key == "mh_proposal_sd") c.mh_proposal_sd = val.get<double>();
      else if (key == "mh_adapt_interval")
        c.mh_adapt_interval = val.get<int>();
      else if (key == "coef_prior_sd") c.coef_prior_sd = val.get<double>();
      else if (key == "a_score1_prior_shape")
        c.a_score1_prior_shape = val.get<double>();
      else if (key == "a_score2_prior_shape")
        c.a_score2_prior_shape = val.get<double>();
      else if (key == "a_mean1_prior_shape")
        c.a_mean1_prior_shape = val.get<double>();
      else if (key == "a_mean2_prior_shape")
        c.a_mean2_prior_shape = val.get<double>();
      else if (key == "noise_prior_shape")
        c.noise_prior_shape = val.get<double>();
      else if (key == "noise_prior_rate")
        c.noise_prior_rate = val.get<double>();
      else if (key == "smooth_prec_upper")
        c.smooth_prec_upper = val.get<double>();
      else if (key == "concurrent")
        c.concurrent = concurrent_from_name(val.get<std::string>());
      else if (key == "concurrent_fixed_value")
        c.concurrent_fixed_value = val.get<double>();
      else if (key == "draw_policy")
        c.draw_policy = draw_policy_from_name(val.get<std::string>());
      else if (key == "normalize_components")
        c.normalize_components = val.get<bool>();
      else if (key == "fix_smooth_prec") c.fix_smooth_prec = val.get<bool>();
      else if (key == "penalty_ridge") c.penalty_ridge = val.get<double>();
      else if (key == "check_invariants")
        c.check_invariants = val.get<bool>();
      else
        throw UsageError("unknown sampler configuration key '" + key + "'");
    } catch (const json::exception& e) {
      throw UsageError("bad value for configuration key '" + key +
                       "': " + e.what());
    }
  }
  return c;
}

json diagnostics_to_json(const ChainDiagnostics& d) {
  return json{{"accept_a_score1", d.accept_a_score1},
              {"accept_a_score2", d.accept_a_score2},
              {"accept_a_mean1", d.accept_a_mean1},
              {"accept_a_mean2", d.accept_a_mean2},
              {"nonfinite_mh_rejections", d.nonfinite_mh_rejections},
              {"degenerate_smooth_intervals", d.degenerate_smooth_intervals},
              {"max_ortho_deviation", d.max_ortho_deviation},
              {"max_refit_deviation", d.max_refit_deviation},
              {"mean_fev", d.mean_fev},
              {"fev_warning", d.fev_warning}};
}

ChainDiagnostics diagnostics_from_json(const json& j) {
  ChainDiagnostics d;
  d.accept_a_score1 = j.value("accept_a_score1", 0.0);
  d.accept_a_score2 = j.value("accept_a_score2", 0.0);
  d.accept_a_mean1 = j.value("accept_a_mean1", 0.0);
  d.accept_a_mean2 = j.value("accept_a_mean2", 0.0);
  d.nonfinite_mh_rejections = j.value("nonfinite_mh_rejections", 0);
  d.degenerate_smooth_intervals = j.value("degenerate_smooth_intervals", 0);
  d.max_ortho_deviation = j.value("max_ortho_deviation", 0.0);
  d.max_refit_deviation = j.value("max_refit_deviation", 0.0);
  d.mean_fev = j.value("mean_fev", std::vector<double>{});
  d.fev_warning = j.value("fev_warning", false);
  return d;
}

struct CsvRow {
  int draw;
  std::string_view block;
  int i;
  int j;
  double value;
};

bool parse_row(std::string_view line, CsvRow* out) {
  std::array<std::string_view, 5> f;
  std::size_t start = 0;
  for (int k = 0; k < 5; ++k) {
    const std::size_t comma = k < 4 ? line.find(',', start) : line.size();
    if (comma == std::string_view::npos) return false;
    f[static_cast<std::size_t>(k)] = line.substr(start, comma - start);
    start = comma + 1;
  }
  auto to_int = [](std::string_view s, int* v) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), *v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
  };
  auto to_double = [](std::string_view s, double* v) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), *v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
  };
  out->block = f[1];
  return to_int(f[0], &out->draw) && to_int(f[2], &out->i) &&
         to_int(f[3], &out->j) && to_double(f[4], &out->value);
}

}  // namespace

std::string posterior_meta_path(const std::string& csv_path) {
  return csv_path + ".meta.json";
}

std::string config_to_json_string(const FpcaConfig& cfg) {
  return config_to_json(cfg).dump(2);
}

FpcaConfig config_from_json_string(const std::string& text, FpcaConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("could not parse configuration JSON: ") +
                     e.what());
  }
  return config_from_json(j, base);
}

void write_posterior(const FpcaPosterior& post, const std::string& csv_path) {
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out)
      throw DataError("cannot open '" + csv_path + "' for writing");
    out << "draw,block,i,j,value\n";
    std::string line;
    for (std::size_t d = 0; d < post.draws.size(); ++d) {
      const auto& s = post.draws[d];
      auto emit = [&](const char* block, Eigen::Index i, Eigen::Index j,
                      double v) {
        out << d << ',' << block << ',' << i << ',' << j << ','
            << fmt_double(v) << '\n';
      };
      for (Eigen::Index j = 0; j < s.eigen_coefs.cols(); ++j)
        for (Eigen::Index i = 0; i < s.eigen_coefs.rows(); ++i)
          emit("phi", i, j, s.eigen_coefs(i, j));
      for (Eigen::Index i = 0; i < s.scores.rows(); ++i)
        for (Eigen::Index j = 0; j < s.scores.cols(); ++j)
          emit("zeta", i, j, s.scores(i, j));
      for (Eigen::Index j = 0; j < s.mean_ctrl.size(); ++j)
        emit("tau0", 0, j, s.mean_ctrl[j]);
      for (Eigen::Index j = 0; j < s.mean_trt.size(); ++j)
        emit("tau1", 0, j, s.mean_trt[j]);
      for (Eigen::Index j = 0; j < s.beta.size(); ++j)
        emit("beta", 0, j, s.beta[j]);
      emit("sigma2", 0, 0, s.noise_var);
      for (Eigen::Index j = 0; j < s.score_var.size(); ++j)
        emit("lambda2", 0, j, s.score_var[j]);
      for (Eigen::Index j = 0; j < s.fev.size(); ++j)
        emit("fev", 0, j, s.fev[j]);
      emit("gamma", 0, 0, s.concurrent_coef);
      emit("med_draw", 0, 0, static_cast<double>(s.mediator_draw_index));
    }
    if (!out)
      throw DataError("write failed for '" + csv_path + "'");
  }

  json meta;
  meta["format"] = "medfpca-posterior";
  meta["version"] = kVersion;
  meta["role"] = post.role;
  meta["knots"] = post.knots;
  meta["grid_size"] = post.grid_size;
  meta["penalty_flavor"] = flavor_name(post.flavor);
  meta["config"] = config_to_json(post.config);
  meta["seed"] = post.seed;
  meta["time_scale"] = post.time_scale;
  meta["n_subjects"] = post.n_subjects;
  meta["n_draws"] = post.draws.size();
  meta["basis_dim"] =
      post.draws.empty() ? 0 : post.draws.front().eigen_coefs.rows();
  meta["covariate_dim"] =
      post.draws.empty() ? 0 : post.draws.front().beta.size();
  meta["diagnostics"] = diagnostics_to_json(post.diagnostics);
  if (!post.mediator_hash.empty()) meta["mediator_hash"] = post.mediator_hash;

  std::ofstream mout(posterior_meta_path(csv_path), std::ios::binary);
  if (!mout)
    throw DataError("cannot open '" + posterior_meta_path(csv_path) +
                    "' for writing");
  mout << meta.dump(2) << '\n';
  if (!mout)
    throw DataError("write failed for '" + posterior_meta_path(csv_path) +
                    "'");
}

FpcaPosterior read_posterior(const std::string& csv_path) {
  std::ifstream min(posterior_meta_path(csv_path), std::ios::binary);
  if (!min)
    throw DataError("missing posterior metadata '" +
                    posterior_meta_path(csv_path) + "'");
  json meta;
  try {
    min >> meta;
  } catch (const json::exception& e) {
    throw DataError("could not parse posterior metadata: " +
                    std::string(e.what()));
  }
  if (meta.value("format", std::string()) != "medfpca-posterior")
    throw DataError("'" + posterior_meta_path(csv_path) +
                    "' is not posterior metadata");

  FpcaPosterior post;
  try {
    post.role = meta.at("role").get<std::string>();
    post.knots = meta.at("knots").get<std::vector<double>>();
    post.grid_size = meta.at("grid_size").get<int>();
    post.flavor = flavor_from_name(
        meta.at("penalty_flavor").get<std::string>());
    post.config = config_from_json(meta.at("config"), FpcaConfig{});
    post.seed = meta.at("seed").get<std::uint64_t>();
    post.time_scale = meta.at("time_scale").get<double>();
    post.n_subjects = meta.at("n_subjects").get<int>();
    post.diagnostics = diagnostics_from_json(meta.at("diagnostics"));
    post.mediator_hash = meta.value("mediator_hash", std::string());
  } catch (const json::exception& e) {
    throw DataError("incomplete posterior metadata: " + std::string(e.what()));
  }
  const auto n_draws = meta.at("n_draws").get<std::size_t>();
  const auto basis_dim = meta.at("basis_dim").get<Eigen::Index>();
  const auto p = meta.at("covariate_dim").get<Eigen::Index>();
  const int R = post.config.n_components;

  post.draws.resize(n_draws);
  for (auto& d : post.draws) {
    d.eigen_coefs = Eigen::MatrixXd::Zero(basis_dim, R);
    d.scores = Eigen::MatrixXd::Zero(post.n_subjects, R);
    d.mean_ctrl = Eigen::VectorXd::Zero(R);
    d.mean_trt = Eigen::VectorXd::Zero(R);
    d.beta = Eigen::VectorXd::Zero(p);
    d.score_var = Eigen::VectorXd::Zero(R);
    d.fev = Eigen::VectorXd::Zero(R);
  }

  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + csv_path + "'");
  std::string line;
  if (!std::getline(in, line) ||
      (line != "draw,block,i,j,value" && line != "draw,block,i,j,value\r"))
    throw DataError("'" + csv_path +
                    "' does not start with the posterior CSV header");
  std::size_t row_no = 1;
  CsvRow row;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!parse_row(line, &row))
      throw DataError("malformed posterior row " + std::to_string(row_no) +
                      " in '" + csv_path + "'");
    if (row.draw < 0 || static_cast<std::size_t>(row.draw) >= n_draws)
      throw DataError("posterior row " + std::to_string(row_no) +
                      ": draw index out of range");
    auto& d = post.draws[static_cast<std::size_t>(row.draw)];
    auto in_range = [&](Eigen::Index i, Eigen::Index j, Eigen::Index rows,
                        Eigen::Index cols) {
      if (i < 0 || i >= rows || j < 0 || j >= cols)
        throw DataError("posterior row " + std::to_string(row_no) +
                        ": index out of range for block '" +
                        std::string(row.block) + "'");
    };
    if (row.block == "phi") {
      in_range(row.i, row.j, basis_dim, R);
      d.eigen_coefs(row.i, row.j) = row.value;
    } else if (row.block == "zeta") {
      in_range(row.i, row.j, post.n_subjects, R);
      d.scores(row.i, row.j) = row.value;
    } else if (row.block == "tau0") {
      in_range(0, row.j, 1, R);
      d.mean_ctrl[row.j] = row.value;
    } else if (row.block == "tau1") {
      in_range(0, row.j, 1, R);
      d.mean_trt[row.j] = row.value;
    } else if (row.block == "beta") {
      in_range(0, row.j, 1, p);
      d.beta[row.j] = row.value;
    } else if (row.block == "sigma2") {
      d.noise_var = row.value;
    } else if (row.block == "lambda2") {
      in_range(0, row.j, 1, R);
      d.score_var[row.j] = row.value;
    } else if (row.block == "fev") {
      in_range(0, row.j, 1, R);
      d.fev[row.j] = row.value;
    } else if (row.block == "gamma") {
      d.concurrent_coef = row.value;
    } else if (row.block == "med_draw") {
      d.mediator_draw_index = static_cast<int>(row.value);
    } else {
      throw DataError("posterior row " + std::to_string(row_no) +
                      ": unknown block '" + std::string(row.block) + "'");
    }
  }
  return post;
}

}  // namespace medfpca
