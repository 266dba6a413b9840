#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "medfpca/dataset.hpp"
#include "medfpca/rng.hpp"

namespace medfpca {

// ---------------------------------------------------------------------------
// Simulation harness: correlated latent confounders, squared-exponential GP
// trajectory noise, Poisson-sparse irregular sampling on per-subject pooled
// uniform grids, and four confounding scenarios with stored ground truth.
// ---------------------------------------------------------------------------

struct ScenarioConfig {
  double rho_tm = 0.0;  // treatment-mediator confounding correlation
  double rho_ty = 0.0;  // treatment-outcome confounding correlation
  double rho_my = 0.0;  // mediator-outcome confounding correlation
  double sigma_m = 1.0;     // mediator heterogeneity scale (GP sd and shift)
  double sigma_y = 1.0;     // outcome heterogeneity scale
  double sigma_x = 1.0;     // covariate sd
  double sigma_noise = 0.5; // measurement-error sd
  double p_treat = 0.5;     // treatment probability
  int n_subjects = 200;
  double pois_mediator = 10.0;  // Poisson mean for mediator counts (shifted +1)
  double pois_outcome = 10.0;   // Poisson mean for outcome counts (shifted +1)
  std::uint64_t seed = 1;
  int scenario = 0;  // 0 custom; 1..4 presets (echoed in manifests)

  /// Throws on an invalid configuration (non-PD confounder correlation
  /// matrix, Poisson means < 1, probabilities outside [0,1], negative sds).
  void validate() const;
  /// The 3x3 confounder correlation matrix.
  Eigen::Matrix3d confounder_corr() const;
};

/// Preset for scenarios 1-4: scenario 1 has all rho = 0; scenario 2 sets
/// rho_tm = 0.5; scenario 3 sets rho_ty = 0.5; scenario 4 sets rho_my = 0.5.
ScenarioConfig scenario_preset(int k);

struct SimulatedTruth {
  struct SubjectTruth {
    std::string id;
    std::vector<double> times;     // pooled per-subject grid, sorted
    std::vector<double> latent_m;  // noise-free mediator process
    std::vector<double> latent_y;  // noise-free outcome process
  };
  std::vector<SubjectTruth> subjects;

  // Analytic effect curves on the reporting grid.
  std::vector<double> grid;  // 101 equally spaced times on [0,1]
  std::vector<double> total, acme, direct, mediator_effect;
};

/// Analytic truth curves of the generating process at time t.
double truth_mediator_effect(double t);  // 0.2 + 2t + sin(2 pi t)
double truth_acme(double t);             // equal to the mediator effect
double truth_direct(double t);           // cos(2 pi t) + 0.2 t^2 + 3t
double truth_total(double t);            // acme + direct

/// One draw from GP(0, sigma^2 exp(-8 (s-t)^2)) on sorted times, Cholesky
/// with 1e-10 jitter. Throws NumericalError if the kernel matrix is not
/// positive definite after jitter.
Eigen::VectorXd sample_gp(const std::vector<double>& times, double sigma,
                          RngStream& rng);

/// Generates the full dataset plus ground truth. Deterministic in cfg.seed;
/// per-subject generation uses independent substreams.
std::pair<LongitudinalDataset, SimulatedTruth> simulate_dataset(
    const ScenarioConfig& cfg);

/// Truth CSVs: per-subject latents (subject_id, time, latent_M, latent_Y)
/// and analytic curves (time, total, acme, direct, mediator_effect).
void write_truth(const SimulatedTruth& truth, const std::string& latent_path,
                 const std::string& curves_path);

}  // namespace medfpca
