#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "medfpca/dataset.hpp"
#include "medfpca/rng.hpp"
#include "medfpca/spline_basis.hpp"

namespace medfpca {

// ---------------------------------------------------------------------------
// Shared Gibbs engine for the latent FPCA regression model
//
//   y_ij = X_ij' beta + gamma * m_i(t_ij) + sum_r score_{i,r} psi_r(t_ij) + e_ij
//
// fitted to either the mediator observations (no concurrent term) or the
// outcome observations (concurrent term supplied per sweep by imputation
// from a mediator posterior). Scores have treatment-arm means with
// multiplicative-gamma shrinkage ladders on both the score variances and the
// arm-mean variances, and t-mixture local scales on the scores.
// ---------------------------------------------------------------------------

enum class ObsRole { kMediator, kOutcome };

/// How the concurrent-mediator coefficient gamma is handled.
enum class ConcurrentPolicy {
  kNone,    // term absent (mediator model)
  kSample,  // conjugate Gaussian update each sweep (outcome model default)
  kFixed,   // held at a constant; consumes no randomness
};

/// How outcome sweeps obtain the imputed mediator regressor. kMean uses the
/// posterior-mean imputation every sweep (regression calibration; avoids the
/// attenuation a per-sweep noisy regressor induces on gamma). kCycle and
/// kRandom feed a single posterior draw per sweep.
enum class MediatorDrawPolicy { kMean, kCycle, kRandom };

struct FpcaConfig {
  int n_components = 5;  // R
  int iterations = 4000;
  int burn_in = 2000;
  int thin = 2;
  double t_mix_df = 5.0;  // v, degrees of freedom of the score t-mixture
  // Lower bound for the t-mixture local scales, capping the per-score prior
  // variance at score_var / floor. Without it, a subject whose few
  // observations cluster in a narrow time window exposes a near-singular
  // interpolation system, and the adaptive scale lets the score chain settle
  // on the enormous exact-interpolating solution. Zero disables the bound.
  double local_scale_floor = 0.01;

  double mh_proposal_sd = 0.2;  // log-scale random walk for a-hyperparameters
  int mh_adapt_interval = 50;   // adaptation cadence during burn-in

  double coef_prior_sd = 100.0;       // N(0, sd^2) prior for beta and gamma
  double a_score1_prior_shape = 2.0;  // a_1   ~ Ga(2, 1)
  double a_score2_prior_shape = 3.0;  // a_2   ~ Ga(3, 1)
  double a_mean1_prior_shape = 2.0;   // a_tau1 ~ Ga(2, 1)
  double a_mean2_prior_shape = 3.0;   // a_tau2 ~ Ga(3, 1)

  // Noise precision prior Ga(shape, rate); (0, 0) reproduces the bare
  // conditional Ga(n/2, SS/2). A proper setting is needed for prior draws.
  double noise_prior_shape = 0.0;
  double noise_prior_rate = 0.0;

  double smooth_prec_upper = 1e4;  // upper truncation for h_r

  // Concurrent-mediator channel (outcome model only).
  ConcurrentPolicy concurrent = ConcurrentPolicy::kNone;
  double concurrent_fixed_value = 0.0;
  MediatorDrawPolicy draw_policy = MediatorDrawPolicy::kMean;

  // Research/testing knobs. Defaults reproduce the production sampler.
  bool normalize_components = true;  // grid normalization + sign convention
  bool fix_smooth_prec = false;      // freeze h_r at its initial value
  double penalty_ridge = 0.0;        // added to the PSD penalty projection
  bool check_invariants = false;     // track orthonormality/refit deviations

  void validate(int basis_dim) const;  // throws UsageError on bad settings
};

/// Full sampler state. Names are by role; the concurrent coefficient is the
/// outcome model's gamma.
struct FpcaState {
  Eigen::MatrixXd eigen_coefs;  // basis_dim x R, column r = phi_r
  Eigen::VectorXd smooth_prec;  // R, curvature precisions h_r
  Eigen::MatrixXd scores;       // N x R
  Eigen::VectorXd mean_ctrl;    // R, arm-0 score means
  Eigen::VectorXd mean_trt;     // R, arm-1 score means
  Eigen::VectorXd beta;         // p
  double noise_var = 1.0;
  Eigen::VectorXd shrink_score;  // R, gamma increments for score variances
  Eigen::VectorXd shrink_mean;   // R, gamma increments for mean variances
  Eigen::MatrixXd local_scale;   // N x R, t-mixture scales
  double a_score1 = 2.0, a_score2 = 3.0;
  double a_mean1 = 2.0, a_mean2 = 3.0;
  double concurrent_coef = 0.0;

  // Derived from the shrinkage ladders; refreshed after every ladder update.
  Eigen::VectorXd score_var;  // R, lambda_r^2 = prod_{l<=r} 1/shrink_score[l]
  Eigen::VectorXd mean_var;   // R, prod_{l<=r} 1/shrink_mean[l]
  void refresh_derived();
};

/// One recorded posterior sample (the downstream-relevant subset of state).
struct FpcaDraw {
  Eigen::MatrixXd eigen_coefs;  // basis_dim x R
  Eigen::MatrixXd scores;       // N x R
  Eigen::VectorXd mean_ctrl, mean_trt;  // R
  Eigen::VectorXd beta;                 // p
  double noise_var = 1.0;
  Eigen::VectorXd score_var;  // R (unsorted, matches component order)
  Eigen::VectorXd fev;        // R, sorted-descending variance shares
  double concurrent_coef = 0.0;
  int mediator_draw_index = -1;  // outcome chains: which draw fed imputation
};

struct ChainDiagnostics {
  double accept_a_score1 = 0.0, accept_a_score2 = 0.0;
  double accept_a_mean1 = 0.0, accept_a_mean2 = 0.0;
  int nonfinite_mh_rejections = 0;
  int degenerate_smooth_intervals = 0;  // h truncation interval collapsed
  double max_ortho_deviation = 0.0;     // only when check_invariants
  double max_refit_deviation = 0.0;     // only when check_invariants
  std::vector<double> mean_fev;         // posterior mean of sorted FEV shares
  bool fev_warning = false;  // top R-1 components explain < 90% on average
};

struct FpcaPosterior {
  std::string role;  // "mediator" or "outcome"
  std::vector<FpcaDraw> draws;
  // Basis echo (enough to reconstruct the SplineBasis).
  std::vector<double> knots;
  int grid_size = 50;
  PenaltyFlavor flavor = PenaltyFlavor::kQuadratic;
  FpcaConfig config;
  std::uint64_t seed = 0;
  double time_scale = 1.0;  // dataset scale echo for reporting
  int n_subjects = 0;
  ChainDiagnostics diagnostics;
  // Outcome posteriors loaded from disk carry the content hash of the
  // mediator posterior they consumed, so downstream stages can refuse
  // mispaired files. Empty for mediator fits and in-memory posteriors.
  std::string mediator_hash;

  SplineBasis basis() const { return SplineBasis(knots, grid_size, flavor); }
};

using ProgressFn = std::function<void(int sweep, int total)>;

class FpcaGibbs;
/// Hook invoked before each sweep; outcome chains use it to refresh the
/// imputed concurrent-mediator values from the mediator posterior.
using PreSweepFn = std::function<void(FpcaGibbs&, int sweep)>;

class FpcaGibbs {
public:
  /// Prepares per-subject blocks for the chosen observation role. Throws
  /// DataError on arm-size violations or singular covariate designs.
  FpcaGibbs(const LongitudinalDataset& data, ObsRole role,
            const SplineBasis& basis, const FpcaConfig& config,
            RngStream rng);

  /// Deterministic initialization (no RNG): pooled least squares for beta,
  /// SVD of grid-interpolated residuals for the components, projections for
  /// the scores, moments for the variances, prior means for hyperparameters.
  void init();

  /// One full Gibbs sweep: components, scores, arm means, beta, variances,
  /// then the concurrent coefficient when it is sampled.
  void sweep();

  // Individual conditional updates (exposed for frozen-parameter tests).
  void sample_eigenfunction(int r);
  void sample_scores();
  void sample_group_means();
  void sample_beta();
  void sample_variances();
  void sample_concurrent_coef();

  /// Supplies imputed concurrent-mediator values (one vector per subject,
  /// aligned with that subject's observation times) for the next sweeps.
  void set_concurrent_values(std::vector<Eigen::VectorXd> values,
                             int source_draw_index);

  /// Ancestral draw of the full state from the prior. Requires a proper
  /// noise prior, a positive penalty ridge, and fix_smooth_prec (used by the
  /// joint-distribution sampler test).
  void prior_draw();
  /// Replaces the observations with a draw from the observation model given
  /// the current state.
  void simulate_observations();

  FpcaDraw snapshot() const;

  const FpcaState& state() const { return state_; }
  FpcaState& mutable_state() { return state_; }
  /// Re-syncs cached per-subject component values after external state edits.
  void refresh_caches();

  const ChainDiagnostics& diagnostics() const { return diag_; }
  ChainDiagnostics& mutable_diagnostics() { return diag_; }
  int last_mediator_draw() const { return concurrent_source_; }
  int num_subjects() const { return static_cast<int>(blocks_.size()); }
  std::size_t total_obs() const { return total_obs_; }
  const SplineBasis& basis() const { return basis_; }
  const FpcaConfig& config() const { return config_; }
  RngStream& rng() { return rng_; }

  /// Finalizes acceptance-rate diagnostics (denominator: post-burn sweeps).
  void finalize_diagnostics(int post_burn_sweeps);

private:
  struct SubjectBlock {
    Eigen::VectorXd y;
    std::vector<double> times;
    Eigen::MatrixXd X;    // n_i x p
    Eigen::MatrixXd B;    // n_i x basis_dim
    Eigen::MatrixXd BtB;  // basis_dim x basis_dim
    Eigen::MatrixXd psi;  // n_i x R, cached B * eigen_coefs
    Eigen::VectorXd concurrent;  // n_i, imputed mediator values (or empty)
    int z = 0;
  };

  void rebuild_component_cache(int r);           // psi.col(r) for all subjects
  Eigen::VectorXd residual_full(const SubjectBlock& b) const;
  void update_shrink_hyper(double& value, int which,
                           const Eigen::VectorXd& deltas, bool first_increment,
                           double prior_shape);
  void check_orthonormality();

  const SplineBasis& basis_;
  FpcaConfig config_;
  RngStream rng_;
  std::vector<SubjectBlock> blocks_;
  std::size_t total_obs_ = 0;
  int p_ = 0;
  Eigen::MatrixXd xtx_;      // pooled X'X
  Eigen::MatrixXd penalty_;  // PSD projection (+ ridge)
  FpcaState state_;
  ChainDiagnostics diag_;
  int concurrent_source_ = -1;

  // MH adaptation bookkeeping (4 hyperparameters).
  double mh_sd_[4];
  int mh_accept_window_[4] = {0, 0, 0, 0};
  int mh_window_count_ = 0;
  long mh_accept_total_[4] = {0, 0, 0, 0};
  int sweep_index_ = 0;
};

/// Runs one chain end to end and packages the posterior. `user_seed` is the
/// seed echoed into the posterior; `stream` is the chain's RNG (normally a
/// substream of the user seed).
FpcaPosterior run_fpca_chain(const LongitudinalDataset& data, ObsRole role,
                             const SplineBasis& basis, const FpcaConfig& cfg,
                             std::uint64_t user_seed, RngStream stream,
                             const ProgressFn& progress = nullptr,
                             const PreSweepFn& pre_sweep = nullptr);

}  // namespace medfpca
