// medfpca: Bayesian causal mediation analysis for sparse longitudinal
// mediator and outcome trajectories.
//
// Pipeline: simulate -> fit-mediator -> fit-outcome -> estimate ->
// sensitivity, plus a standalone validate command. Every writing command
// drops a JSON manifest with content hashes of its inputs and outputs.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "medfpca/dataset.hpp"
#include "medfpca/diagnostics.hpp"
#include "medfpca/errors.hpp"
#include "medfpca/estimands.hpp"
#include "medfpca/manifest.hpp"
#include "medfpca/mediator.hpp"
#include "medfpca/outcome.hpp"
#include "medfpca/posterior_io.hpp"
#include "medfpca/rng.hpp"
#include "medfpca/sensitivity.hpp"
#include "medfpca/simulate.hpp"
#include "medfpca/spline_basis.hpp"
#include "medfpca/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace medfpca;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_load_warnings(const LoadReport& report) {
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
}

PenaltyFlavor parse_flavor(const std::string& s) {
  if (s == "quadratic") return PenaltyFlavor::kQuadratic;
  if (s == "cubic") return PenaltyFlavor::kCubic;
  throw UsageError("--penalty must be quadratic or cubic (got '" + s + "')");
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  int scenario = 1;
  std::uint64_t seed = 1;
  int n = 200;
  double pois_mediator = 10.0, pois_outcome = 10.0;
  double sigma_noise = 0.5, p_treat = 0.5;
  double rho_tm = 0.0, rho_ty = 0.0, rho_my = 0.0;
  std::string out_dir = ".";

  CLI::Option *n_opt = nullptr, *pm_opt = nullptr, *py_opt = nullptr;
  CLI::Option *noise_opt = nullptr, *pt_opt = nullptr;
  CLI::Option *rtm_opt = nullptr, *rty_opt = nullptr, *rmy_opt = nullptr;
};

json scenario_to_json(const ScenarioConfig& c) {
  return json{{"scenario", c.scenario},
              {"rho_tm", c.rho_tm},
              {"rho_ty", c.rho_ty},
              {"rho_my", c.rho_my},
              {"sigma_m", c.sigma_m},
              {"sigma_y", c.sigma_y},
              {"sigma_x", c.sigma_x},
              {"sigma_noise", c.sigma_noise},
              {"p_treat", c.p_treat},
              {"n_subjects", c.n_subjects},
              {"pois_mediator", c.pois_mediator},
              {"pois_outcome", c.pois_outcome},
              {"seed", c.seed}};
}

int cmd_simulate(const SimulateArgs& a,
                 const std::vector<std::string>& argv_echo) {
  Timer timer;
  ScenarioConfig cfg = scenario_preset(a.scenario);
  cfg.seed = a.seed;
  if (a.n_opt->count()) cfg.n_subjects = a.n;
  if (a.pm_opt->count()) cfg.pois_mediator = a.pois_mediator;
  if (a.py_opt->count()) cfg.pois_outcome = a.pois_outcome;
  if (a.noise_opt->count()) cfg.sigma_noise = a.sigma_noise;
  if (a.pt_opt->count()) cfg.p_treat = a.p_treat;
  if (a.rtm_opt->count()) cfg.rho_tm = a.rho_tm;
  if (a.rty_opt->count()) cfg.rho_ty = a.rho_ty;
  if (a.rmy_opt->count()) cfg.rho_my = a.rho_my;
  cfg.validate();

  const auto [data, truth] = simulate_dataset(cfg);

  fs::create_directories(a.out_dir);
  const std::string dataset_path = (fs::path(a.out_dir) / "dataset.csv").string();
  const std::string latent_path =
      (fs::path(a.out_dir) / "truth_latent.csv").string();
  const std::string curves_path =
      (fs::path(a.out_dir) / "truth_curves.csv").string();
  write_dataset(data, dataset_path);
  write_truth(truth, latent_path, curves_path);

  RunManifest manifest;
  manifest.command = "simulate";
  manifest.argv = argv_echo;
  manifest.version = kVersion;
  manifest.seed = cfg.seed;
  manifest.config_json = scenario_to_json(cfg).dump();
  manifest.add_output(dataset_path);
  manifest.add_output(latent_path);
  manifest.add_output(curves_path);
  manifest.notes.push_back(
      "subject count and sampling-rate defaults are desk-scale tool defaults");
  if (cfg.scenario == 3)
    manifest.notes.push_back(
        "scenario 3 applies treatment-outcome confounding (rho_ty=0.5)");
  if (cfg.scenario == 4)
    manifest.notes.push_back(
        "scenario 4 applies mediator-outcome confounding (rho_my=0.5)");
  manifest.elapsed_seconds = timer.seconds();
  manifest.write((fs::path(a.out_dir) / "simulate.manifest.json").string());

  std::cout << "wrote " << dataset_path << " (" << data.num_subjects()
            << " subjects, " << data.total_mediator_obs() << " mediator / "
            << data.total_outcome_obs() << " outcome observations)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit-mediator / fit-outcome
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string data_path;
  std::string out_path;
  std::string config_path;
  int n_components = 5, iterations = 4000, burn_in = 2000, thin = 2;
  int chains = 1;
  int knots = 10, grid_size = 50;
  std::string penalty = "quadratic";
  std::uint64_t seed = 1;
  bool quiet = false;

  // outcome-only
  std::string mediator_path;
  std::string gamma_policy = "sample";
  double gamma_value = 0.0;
  std::string draw_policy = "mean";

  CLI::Option *r_opt = nullptr, *iters_opt = nullptr, *burn_opt = nullptr;
  CLI::Option *thin_opt = nullptr;
  CLI::Option *gp_opt = nullptr, *gv_opt = nullptr, *dp_opt = nullptr;
};

FpcaConfig effective_fit_config(const FitArgs& a, bool outcome) {
  FpcaConfig cfg;
  if (!a.config_path.empty())
    cfg = config_from_json_string(read_text_file(a.config_path), cfg);
  if (a.r_opt->count()) cfg.n_components = a.n_components;
  if (a.iters_opt->count()) cfg.iterations = a.iterations;
  if (a.burn_opt->count()) cfg.burn_in = a.burn_in;
  if (a.thin_opt->count()) cfg.thin = a.thin;
  if (outcome) {
    if (cfg.concurrent == ConcurrentPolicy::kNone)
      cfg.concurrent = ConcurrentPolicy::kSample;
    if (a.gp_opt->count()) {
      if (a.gamma_policy == "sample")
        cfg.concurrent = ConcurrentPolicy::kSample;
      else if (a.gamma_policy == "fixed")
        cfg.concurrent = ConcurrentPolicy::kFixed;
      else
        throw UsageError("--gamma-policy must be sample or fixed (got '" +
                         a.gamma_policy + "')");
    }
    if (a.gv_opt->count()) cfg.concurrent_fixed_value = a.gamma_value;
    if (a.dp_opt->count()) {
      if (a.draw_policy == "mean")
        cfg.draw_policy = MediatorDrawPolicy::kMean;
      else if (a.draw_policy == "cycle")
        cfg.draw_policy = MediatorDrawPolicy::kCycle;
      else if (a.draw_policy == "random")
        cfg.draw_policy = MediatorDrawPolicy::kRandom;
      else
        throw UsageError(
            "--draw-policy must be mean, cycle, or random (got '" +
            a.draw_policy + "')");
    }
  }
  return cfg;
}

std::string chain_file_name(const std::string& out_path, int chain) {
  fs::path p(out_path);
  const std::string ext = p.extension().string();
  fs::path stem = p;
  stem.replace_extension();
  return stem.string() + ".chain" + std::to_string(chain) + ext;
}

/// Pooled observation times for the fitted role (knot placement).
std::vector<double> pooled_times(const LongitudinalDataset& data,
                                 ObsRole role) {
  std::vector<double> times;
  for (const auto& s : data.subjects) {
    const auto& obs =
        role == ObsRole::kMediator ? s.mediator_obs : s.outcome_obs;
    for (const auto& o : obs) times.push_back(o.time);
  }
  return times;
}

json chain_summary_json(const std::vector<FpcaPosterior>& chains) {
  // split R-hat over a few scalar summaries
  auto collect = [&](auto&& extract) {
    std::vector<std::vector<double>> series;
    for (const auto& post : chains) {
      std::vector<double> s;
      s.reserve(post.draws.size());
      for (const auto& d : post.draws) s.push_back(extract(d));
      series.push_back(std::move(s));
    }
    return series;
  };
  json rhat;
  rhat["sigma2"] =
      split_rhat(collect([](const FpcaDraw& d) { return d.noise_var; }));
  const int R = chains.front().config.n_components;
  for (int r = 0; r < R; ++r) {
    rhat["tau_diff_" + std::to_string(r)] = split_rhat(collect(
        [r](const FpcaDraw& d) { return d.mean_trt[r] - d.mean_ctrl[r]; }));
    rhat["lambda2_" + std::to_string(r)] = split_rhat(
        collect([r](const FpcaDraw& d) { return d.score_var[r]; }));
  }
  if (chains.front().config.concurrent == ConcurrentPolicy::kSample)
    rhat["gamma"] =
        split_rhat(collect([](const FpcaDraw& d) { return d.concurrent_coef; }));
  return rhat;
}

int cmd_fit(const FitArgs& a, bool outcome,
            const std::vector<std::string>& argv_echo) {
  Timer timer;
  const char* name = outcome ? "fit-outcome" : "fit-mediator";
  if (outcome && a.mediator_path.empty())
    throw UsageError("fit-outcome requires --mediator-posterior");
  if (a.chains < 1) throw UsageError("--chains must be >= 1");

  LoadReport report;
  const LongitudinalDataset data = load_dataset(a.data_path, {}, &report);
  print_load_warnings(report);

  const FpcaConfig cfg = effective_fit_config(a, outcome);
  const ObsRole role = outcome ? ObsRole::kOutcome : ObsRole::kMediator;
  const SplineBasis basis(make_knots(pooled_times(data, role), a.knots),
                          a.grid_size, parse_flavor(a.penalty));

  FpcaPosterior mediator_post;
  std::string mediator_hash;
  if (outcome) {
    mediator_post = read_posterior(a.mediator_path);
    mediator_hash = file_hash_hex(a.mediator_path);
  }

  ProgressFn progress = nullptr;
  if (!a.quiet)
    progress = [&](int sweep, int total) {
      std::cerr << name << ": sweep " << sweep << "/" << total << '\n';
    };

  std::vector<FpcaPosterior> chain_posts;
  chain_posts.reserve(static_cast<std::size_t>(a.chains));
  for (int c = 0; c < a.chains; ++c) {
    RngStream stream =
        RngStream(a.seed).substream(static_cast<std::uint64_t>(c));
    if (!a.quiet && a.chains > 1)
      std::cerr << name << ": chain " << c << " (substream " << a.seed << "."
                << c << ")\n";
    if (outcome)
      chain_posts.push_back(run_outcome_chain(data, basis, mediator_post, cfg,
                                              a.seed, stream, progress));
    else
      chain_posts.push_back(
          run_mediator_chain(data, basis, cfg, a.seed, stream, progress));
  }

  RunManifest manifest;
  manifest.command = name;
  manifest.argv = argv_echo;
  manifest.version = kVersion;
  manifest.seed = a.seed;
  manifest.config_json = config_to_json_string(chain_posts.front().config);
  manifest.add_input(a.data_path);
  if (outcome) {
    manifest.add_input(a.mediator_path);
    manifest.notes.push_back("mediator posterior hash " + mediator_hash);
  }

  // merged posterior at --out (single chain: just that chain)
  FpcaPosterior merged = chain_posts.front();
  for (int c = 1; c < a.chains; ++c) {
    const auto& extra = chain_posts[static_cast<std::size_t>(c)].draws;
    merged.draws.insert(merged.draws.end(), extra.begin(), extra.end());
  }
  merged.mediator_hash = mediator_hash;
  write_posterior(merged, a.out_path);
  manifest.add_output(a.out_path);
  manifest.add_output(posterior_meta_path(a.out_path));

  if (a.chains > 1) {
    for (int c = 0; c < a.chains; ++c) {
      auto& post = chain_posts[static_cast<std::size_t>(c)];
      post.mediator_hash = mediator_hash;
      const std::string path = chain_file_name(a.out_path, c);
      write_posterior(post, path);
      manifest.add_output(path);
      manifest.add_output(posterior_meta_path(path));
    }
    json summary;
    summary["chains"] = a.chains;
    summary["split_rhat"] = chain_summary_json(chain_posts);
    const std::string summary_path = a.out_path + ".chains.json";
    std::ofstream out(summary_path, std::ios::binary);
    out << summary.dump(2) << '\n';
    if (!out) throw DataError("write failed for '" + summary_path + "'");
    manifest.add_output(summary_path);
    if (!a.quiet) std::cerr << name << ": wrote " << summary_path << '\n';
  }

  const auto& diag = merged.diagnostics;
  json diag_json;
  diag_json["accept_a_score1"] = diag.accept_a_score1;
  diag_json["accept_a_score2"] = diag.accept_a_score2;
  diag_json["accept_a_mean1"] = diag.accept_a_mean1;
  diag_json["accept_a_mean2"] = diag.accept_a_mean2;
  diag_json["mean_fev"] = diag.mean_fev;
  diag_json["fev_warning"] = diag.fev_warning;
  manifest.diagnostics_json = diag_json.dump();

  if (diag.fev_warning) {
    std::cerr << "warning: the top " << merged.config.n_components - 1
              << " components explain less than 90% of score variance on "
                 "average; consider a larger --R\n";
    manifest.notes.push_back("FEV warning: component budget may be too small");
  }

  manifest.elapsed_seconds = timer.seconds();
  manifest.write(a.out_path + ".manifest.json");
  std::cout << "wrote " << a.out_path << " (" << merged.draws.size()
            << " draws)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate / sensitivity
// ---------------------------------------------------------------------------

struct CurveArgs {
  std::string mediator_path, outcome_path, out_path;
  int grid_points = 101;
  double level = 0.95;
  std::vector<double> times = {0.25, 0.5, 0.75};  // original units
  // sensitivity-only
  std::vector<double> rho_grid = {-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9};
  double reference_time = 0.5;  // original units
  double probe_time = 0.5;      // original units
};

std::pair<FpcaPosterior, FpcaPosterior> load_posterior_pair(
    const CurveArgs& a, RunManifest& manifest) {
  FpcaPosterior med = read_posterior(a.mediator_path);
  FpcaPosterior out = read_posterior(a.outcome_path);
  manifest.add_input(a.mediator_path);
  manifest.add_input(a.outcome_path);
  const std::string med_hash = file_hash_hex(a.mediator_path);
  if (out.mediator_hash.empty())
    throw DataError("outcome posterior '" + a.outcome_path +
                    "' carries no mediator provenance; refit the outcome "
                    "model with fit-outcome");
  if (out.mediator_hash != med_hash)
    throw DataError(
        "posterior pairing mismatch: outcome posterior was fitted against a "
        "mediator posterior with hash " + out.mediator_hash +
        ", but '" + a.mediator_path + "' hashes to " + med_hash);
  return {std::move(med), std::move(out)};
}

int cmd_estimate(const CurveArgs& a,
                 const std::vector<std::string>& argv_echo) {
  Timer timer;
  RunManifest manifest;
  manifest.command = "estimate";
  manifest.argv = argv_echo;
  manifest.version = kVersion;

  const auto [med, out] = load_posterior_pair(a, manifest);
  manifest.seed = out.seed;

  const EffectCurves curves =
      compute_effect_curves(med, out, uniform_grid(a.grid_points));
  write_effects_csv(a.out_path, curves, a.level);
  manifest.add_output(a.out_path);

  std::vector<double> probes;
  for (double t : a.times) probes.push_back(t / curves.time_scale);
  std::cout << effects_table(curves, probes, a.level);

  manifest.elapsed_seconds = timer.seconds();
  manifest.write(a.out_path + ".manifest.json");
  return kExitOk;
}

int cmd_sensitivity(const CurveArgs& a,
                    const std::vector<std::string>& argv_echo) {
  Timer timer;
  RunManifest manifest;
  manifest.command = "sensitivity";
  manifest.argv = argv_echo;
  manifest.version = kVersion;

  const auto [med, out] = load_posterior_pair(a, manifest);
  manifest.seed = out.seed;

  const double ref_norm = a.reference_time / out.time_scale;
  const SensitivityCurves curves = sensitivity_curves(
      med, out, a.rho_grid, uniform_grid(a.grid_points), ref_norm);
  write_sensitivity_csv(a.out_path, curves, a.level);
  manifest.add_output(a.out_path);

  const MomentTriple moments = estimate_moments(med, out, ref_norm);
  std::cout << "process moments at t = " << a.reference_time
            << ": var_m = " << moments.var_m << ", var_y = " << moments.var_y
            << ", cov = " << moments.cov << '\n';
  std::cout << "gamma(rho = 0) = "
            << gamma_given_rho(0.0, moments.cov, moments.var_m, moments.var_y)
            << '\n';
  std::cout << "rho      mean adjusted gamma\n";
  for (std::size_t k = 0; k < curves.rhos.size(); ++k) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%+.3f   %.6f\n", curves.rhos[k],
                  curves.gamma_adj_mean[k]);
    std::cout << buf;
  }
  const auto breakeven =
      breakeven_rho(curves, a.probe_time / out.time_scale, a.level);
  if (breakeven)
    std::cout << "mediated-effect band at t = " << a.probe_time
              << " first covers zero at rho = " << *breakeven << '\n';
  else
    std::cout << "mediated-effect band at t = " << a.probe_time
              << " excludes zero for every supplied rho\n";

  manifest.elapsed_seconds = timer.seconds();
  manifest.write(a.out_path + ".manifest.json");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int cmd_validate(const std::string& data_path) {
  LoadReport report;
  const LongitudinalDataset data = load_dataset(data_path, {}, &report);
  print_load_warnings(report);
  const ValidationReport v = validate_dataset(data);
  std::cout << v.to_string();
  if (!v.ok()) {
    for (const auto& f : v.fatal) std::cerr << "fatal: " << f << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian causal mediation for sparse longitudinal "
               "trajectories (FPCA + Gibbs)"};
  app.set_version_flag("--version", std::string(medfpca::kVersion));
  app.require_subcommand(1);

  std::vector<std::string> argv_echo(argv, argv + argc);

  // --- simulate ---
  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "Generate a synthetic dataset with stored ground truth");
  c_sim->add_option("--scenario", sim.scenario,
                    "Confounding scenario preset (1-4)");
  c_sim->add_option("--seed", sim.seed, "Master RNG seed");
  sim.n_opt = c_sim->add_option("--n", sim.n, "Number of subjects");
  sim.pm_opt = c_sim->add_option("--pois-mediator", sim.pois_mediator,
                                 "Poisson mean of mediator counts (+1 shift)");
  sim.py_opt = c_sim->add_option("--pois-outcome", sim.pois_outcome,
                                 "Poisson mean of outcome counts (+1 shift)");
  sim.noise_opt = c_sim->add_option("--sigma-noise", sim.sigma_noise,
                                    "Measurement error sd");
  sim.pt_opt =
      c_sim->add_option("--p-treat", sim.p_treat, "Treatment probability");
  sim.rtm_opt = c_sim->add_option("--rho-tm", sim.rho_tm,
                                  "Treatment-mediator confounding");
  sim.rty_opt = c_sim->add_option("--rho-ty", sim.rho_ty,
                                  "Treatment-outcome confounding");
  sim.rmy_opt = c_sim->add_option("--rho-my", sim.rho_my,
                                  "Mediator-outcome confounding");
  c_sim->add_option("--out-dir", sim.out_dir, "Output directory");

  // --- fit-mediator / fit-outcome ---
  FitArgs fit_med, fit_out;
  auto add_fit_options = [](CLI::App* c, FitArgs& a) {
    c->add_option("--data", a.data_path, "Dataset CSV")->required();
    c->add_option("--out", a.out_path, "Posterior CSV path")->required();
    c->add_option("--config", a.config_path,
                  "JSON sampler configuration (flags override it)");
    a.r_opt = c->add_option("--R", a.n_components, "Number of components");
    a.iters_opt = c->add_option("--iters", a.iterations, "Gibbs sweeps");
    a.burn_opt = c->add_option("--burn", a.burn_in, "Burn-in sweeps");
    a.thin_opt = c->add_option("--thin", a.thin, "Thinning stride");
    c->add_option("--chains", a.chains, "Independent chains");
    c->add_option("--seed", a.seed, "Master RNG seed");
    c->add_option("--knots", a.knots, "Number of spline knots");
    c->add_option("--grid-size", a.grid_size,
                  "Orthonormality/inner-product grid size");
    c->add_option("--penalty", a.penalty, "Penalty flavor: quadratic|cubic");
    c->add_flag("--quiet", a.quiet, "Suppress progress output");
  };
  CLI::App* c_fm = app.add_subcommand(
      "fit-mediator", "Fit the mediator trajectory model by Gibbs sampling");
  add_fit_options(c_fm, fit_med);
  CLI::App* c_fo = app.add_subcommand(
      "fit-outcome",
      "Fit the outcome trajectory model against a mediator posterior");
  add_fit_options(c_fo, fit_out);
  c_fo->add_option("--mediator-posterior", fit_out.mediator_path,
                   "Mediator posterior CSV from fit-mediator");
  fit_out.gp_opt =
      c_fo->add_option("--gamma-policy", fit_out.gamma_policy,
                       "Concurrent coefficient handling: sample|fixed");
  fit_out.gv_opt = c_fo->add_option("--gamma-value", fit_out.gamma_value,
                                    "Value used when --gamma-policy fixed");
  fit_out.dp_opt =
      c_fo->add_option("--draw-policy", fit_out.draw_policy,
                       "Mediator imputation per sweep: mean|cycle|random");

  // --- estimate / sensitivity ---
  CurveArgs est, sens;
  auto add_curve_options = [](CLI::App* c, CurveArgs& a) {
    c->add_option("--mediator-posterior", a.mediator_path,
                  "Mediator posterior CSV")
        ->required();
    c->add_option("--outcome-posterior", a.outcome_path,
                  "Outcome posterior CSV")
        ->required();
    c->add_option("--out", a.out_path, "Curve CSV path")->required();
    c->add_option("--grid", a.grid_points, "Reporting grid size");
    c->add_option("--level", a.level, "Credible band mass");
  };
  CLI::App* c_est = app.add_subcommand(
      "estimate", "Total, mediated, and direct effect curves with bands");
  add_curve_options(c_est, est);
  c_est->add_option("--times", est.times,
                    "Summary probe times (original units)")
      ->delimiter(',');
  CLI::App* c_sens = app.add_subcommand(
      "sensitivity",
      "Mediated-effect curves under assumed residual confounding");
  add_curve_options(c_sens, sens);
  c_sens->add_option("--rho-grid", sens.rho_grid,
                     "Residual correlations to scan (comma separated)")
      ->delimiter(',');
  c_sens->add_option("--reference-time", sens.reference_time,
                     "Time at which process variances are read");
  c_sens->add_option("--probe-time", sens.probe_time,
                     "Time probed for the break-even rho");

  // --- validate ---
  std::string validate_path;
  CLI::App* c_val = app.add_subcommand(
      "validate", "Structural checks on a dataset CSV");
  c_val->add_option("--data", validate_path, "Dataset CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_sim) return cmd_simulate(sim, argv_echo);
    if (*c_fm) return cmd_fit(fit_med, false, argv_echo);
    if (*c_fo) return cmd_fit(fit_out, true, argv_echo);
    if (*c_est) return cmd_estimate(est, argv_echo);
    if (*c_sens) return cmd_sensitivity(sens, argv_echo);
    if (*c_val) return cmd_validate(validate_path);
  } catch (const medfpca::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const medfpca::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const medfpca::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
