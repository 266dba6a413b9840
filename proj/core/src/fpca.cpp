#include "medfpca/fpca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "medfpca/errors.hpp"

namespace medfpca {

namespace {

constexpr double kJitter = 1e-8;
constexpr double kVarFloor = 1e-6;

}  // namespace

void FpcaConfig::validate(int basis_dim) const {
  if (n_components < 1)
    throw UsageError("n_components must be >= 1");
  if (n_components > basis_dim)
    throw UsageError("n_components (" + std::to_string(n_components) +
                     ") exceeds the basis dimension (" +
                     std::to_string(basis_dim) + ")");
  if (iterations < 1) throw UsageError("iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations)
    throw UsageError("burn_in must satisfy 0 <= burn_in < iterations");
  if (thin < 1) throw UsageError("thin must be >= 1");
  if (!(t_mix_df > 0.0)) throw UsageError("t_mix_df must be positive");
  if (!(local_scale_floor >= 0.0) || local_scale_floor >= 1.0)
    throw UsageError("local_scale_floor must lie in [0, 1)");
  if (!(mh_proposal_sd > 0.0)) throw UsageError("mh_proposal_sd must be positive");
  if (mh_adapt_interval < 1) throw UsageError("mh_adapt_interval must be >= 1");
  if (!(coef_prior_sd > 0.0)) throw UsageError("coef_prior_sd must be positive");
  if (!(smooth_prec_upper > 0.0))
    throw UsageError("smooth_prec_upper must be positive");
  if (noise_prior_shape < 0.0 || noise_prior_rate < 0.0)
    throw UsageError("noise prior parameters must be nonnegative");
  if (penalty_ridge < 0.0) throw UsageError("penalty_ridge must be nonnegative");
}

void FpcaState::refresh_derived() {
  const auto r = shrink_score.size();
  score_var.resize(r);
  mean_var.resize(r);
  double acc_s = 1.0, acc_m = 1.0;
  for (Eigen::Index l = 0; l < r; ++l) {
    acc_s *= shrink_score[l];
    acc_m *= shrink_mean[l];
    score_var[l] = 1.0 / acc_s;
    mean_var[l] = 1.0 / acc_m;
  }
}

FpcaGibbs::FpcaGibbs(const LongitudinalDataset& data, ObsRole role,
                     const SplineBasis& basis, const FpcaConfig& config,
                     RngStream rng)
    : basis_(basis), config_(config), rng_(rng) {
  config_.validate(basis_.dimension());
  require_arm_sizes(data);
  p_ = data.covariate_dim();

  blocks_.reserve(data.subjects.size());
  for (const auto& s : data.subjects) {
    const auto& obs = role == ObsRole::kMediator ? s.mediator_obs : s.outcome_obs;
    SubjectBlock b;
    b.z = s.treatment;
    const auto n = static_cast<Eigen::Index>(obs.size());
    b.y.resize(n);
    b.times.reserve(obs.size());
    b.X.resize(n, p_);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& o = obs[static_cast<std::size_t>(j)];
      b.y[j] = o.value;
      b.times.push_back(o.time);
      if (p_ > 0) b.X.row(j) = s.covariates_at(o.time).transpose();
    }
    b.B = basis_.matrix(b.times);
    b.BtB = b.B.transpose() * b.B;
    total_obs_ += obs.size();
    blocks_.push_back(std::move(b));
  }
  if (total_obs_ == 0)
    throw DataError("no observations available for the requested role");

  xtx_ = Eigen::MatrixXd::Zero(p_, p_);
  for (const auto& b : blocks_) xtx_ += b.X.transpose() * b.X;

  penalty_ = basis_.penalty_psd();
  if (config_.penalty_ridge > 0.0)
    penalty_.diagonal().array() += config_.penalty_ridge;

  for (double& sd : mh_sd_) sd = config_.mh_proposal_sd;
}

void FpcaGibbs::init() {
  const int k = basis_.dimension();
  const int R = config_.n_components;
  const auto N = static_cast<Eigen::Index>(blocks_.size());

  // --- beta from pooled least squares ---------------------------------
  state_.beta = Eigen::VectorXd::Zero(p_);
  if (p_ > 0) {
    Eigen::MatrixXd x_all(static_cast<Eigen::Index>(total_obs_), p_);
    Eigen::VectorXd y_all(static_cast<Eigen::Index>(total_obs_));
    Eigen::Index at = 0;
    for (const auto& b : blocks_) {
      x_all.middleRows(at, b.y.size()) = b.X;
      y_all.segment(at, b.y.size()) = b.y;
      at += b.y.size();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x_all);
    qr.setThreshold(1e-10);
    if (qr.rank() < p_) {
      // name the dependent columns (those beyond the numerical rank in
      // pivot order)
      std::ostringstream msg;
      msg << "singular covariate design; dependent column indices:";
      const auto perm = qr.colsPermutation().indices();
      for (Eigen::Index j = qr.rank(); j < p_; ++j) msg << ' ' << perm[j];
      throw DataError(msg.str());
    }
    state_.beta = qr.solve(y_all);
  }

  // --- concurrent coefficient before the component fit ------------------
  // The outcome components must be fitted to the residual after the
  // mediator channel, or they absorb it and leave the sampler in a
  // gamma-near-zero basin it cannot escape by single-site updates.
  state_.concurrent_coef = 0.0;
  if (config_.concurrent == ConcurrentPolicy::kFixed) {
    state_.concurrent_coef = config_.concurrent_fixed_value;
  } else if (config_.concurrent == ConcurrentPolicy::kSample) {
    double num = 0.0, den = 0.0;
    for (const auto& b : blocks_) {
      if (b.concurrent.size() != b.y.size() || b.y.size() == 0) continue;
      Eigen::VectorXd r = b.y;
      if (p_ > 0) r -= b.X * state_.beta;
      num += b.concurrent.dot(r);
      den += b.concurrent.squaredNorm();
    }
    state_.concurrent_coef = den > 0.0 ? num / den : 0.0;
  }
  const bool use_concurrent = config_.concurrent != ConcurrentPolicy::kNone;

  // --- components from the SVD of grid-interpolated residuals ----------
  const auto& grid = basis_.grid_times();
  const int G = basis_.grid_size();
  Eigen::MatrixXd resid_grid(N, G);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& b = blocks_[static_cast<std::size_t>(i)];
    Eigen::VectorXd r = b.y;
    if (p_ > 0) r -= b.X * state_.beta;
    if (use_concurrent && b.concurrent.size() == b.y.size())
      r -= state_.concurrent_coef * b.concurrent;
    // linear interpolation onto the grid with flat extrapolation
    for (int g = 0; g < G; ++g) {
      const double t = grid[static_cast<std::size_t>(g)];
      const auto& ts = b.times;
      double v;
      if (ts.empty()) {
        v = 0.0;
      } else if (t <= ts.front()) {
        v = r[0];
      } else if (t >= ts.back()) {
        v = r[r.size() - 1];
      } else {
        const auto hi = std::upper_bound(ts.begin(), ts.end(), t) - ts.begin();
        const auto lo = hi - 1;
        const double w = (t - ts[static_cast<std::size_t>(lo)]) /
                         (ts[static_cast<std::size_t>(hi)] -
                          ts[static_cast<std::size_t>(lo)]);
        v = (1.0 - w) * r[lo] + w * r[hi];
      }
      resid_grid(i, g) = v;
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid_grid, Eigen::ComputeThinV);
  state_.eigen_coefs.resize(k, R);
  // map grid functions to basis coefficients by least squares on B_G
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> bqr(basis_.grid_matrix());
  const double sqrt_g = std::sqrt(static_cast<double>(G));
  for (int r = 0; r < R; ++r) {
    Eigen::VectorXd target = svd.matrixV().col(r) * sqrt_g;  // unit grid norm
    state_.eigen_coefs.col(r) = bqr.solve(target);
  }
  // Gram-Schmidt in the grid inner product
  for (int r = 0; r < R; ++r) {
    auto col = state_.eigen_coefs.col(r);
    for (int s = 0; s < r; ++s)
      col -= basis_.grid_inner(state_.eigen_coefs.col(s), col) *
             state_.eigen_coefs.col(s);
    const double nrm = std::sqrt(std::max(basis_.grid_norm2(col), 1e-12));
    col /= nrm;
    if (basis_.grid_mean(col) < 0.0) col = -col;
  }

  // --- scores from ridge projections -----------------------------------
  state_.scores.resize(N, R);
  for (Eigen::Index i = 0; i < N; ++i) {
    auto& b = blocks_[static_cast<std::size_t>(i)];
    b.psi = b.B * state_.eigen_coefs;
    Eigen::VectorXd r = b.y;
    if (p_ > 0) r -= b.X * state_.beta;
    if (use_concurrent && b.concurrent.size() == b.y.size())
      r -= state_.concurrent_coef * b.concurrent;
    Eigen::MatrixXd q = b.psi.transpose() * b.psi;
    // Unit ridge keeps starting scores bounded for subjects whose few
    // clustered observations leave psi^T psi nearly singular; the exact
    // interpolating solution can be enormous, and starting there (with the
    // variance ladder initialized to match) seeds a basin the sampler
    // cannot leave.
    q.diagonal().array() += 1.0;
    state_.scores.row(i) = q.llt().solve(b.psi.transpose() * r).transpose();
  }

  // --- arm means and variances from moments -----------------------------
  state_.mean_ctrl = Eigen::VectorXd::Zero(R);
  state_.mean_trt = Eigen::VectorXd::Zero(R);
  Eigen::VectorXd n_ctrl = Eigen::VectorXd::Zero(R),
                  n_trt = Eigen::VectorXd::Zero(R);
  for (Eigen::Index i = 0; i < N; ++i) {
    const int z = blocks_[static_cast<std::size_t>(i)].z;
    for (int r = 0; r < R; ++r) {
      if (z == 1) {
        state_.mean_trt[r] += state_.scores(i, r);
        n_trt[r] += 1.0;
      } else {
        state_.mean_ctrl[r] += state_.scores(i, r);
        n_ctrl[r] += 1.0;
      }
    }
  }
  for (int r = 0; r < R; ++r) {
    state_.mean_trt[r] /= std::max(n_trt[r], 1.0);
    state_.mean_ctrl[r] /= std::max(n_ctrl[r], 1.0);
  }

  double ss = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& b = blocks_[static_cast<std::size_t>(i)];
    Eigen::VectorXd r = b.y - b.psi * state_.scores.row(i).transpose();
    if (p_ > 0) r -= b.X * state_.beta;
    if (use_concurrent && b.concurrent.size() == b.y.size())
      r -= state_.concurrent_coef * b.concurrent;
    ss += r.squaredNorm();
  }
  state_.noise_var =
      std::max(ss / static_cast<double>(total_obs_), kVarFloor);

  Eigen::VectorXd lambda2(R);
  for (int r = 0; r < R; ++r) {
    const Eigen::VectorXd col = state_.scores.col(r);
    const double m = col.mean();
    lambda2[r] = std::max(
        (col.array() - m).square().sum() / std::max<double>(N - 1, 1),
        kVarFloor);
  }
  // shrink increments consistent with the initial lambda^2 ladder
  state_.shrink_score.resize(R);
  state_.shrink_score[0] = 1.0 / lambda2[0];
  for (int r = 1; r < R; ++r)
    state_.shrink_score[r] = lambda2[r - 1] / lambda2[r];

  // mean-ladder increments at prior means
  state_.shrink_mean.resize(R);
  state_.a_score1 = config_.a_score1_prior_shape;
  state_.a_score2 = config_.a_score2_prior_shape;
  state_.a_mean1 = config_.a_mean1_prior_shape;
  state_.a_mean2 = config_.a_mean2_prior_shape;
  state_.shrink_mean[0] = state_.a_mean1;
  for (int r = 1; r < R; ++r) state_.shrink_mean[r] = state_.a_mean2;

  state_.local_scale = Eigen::MatrixXd::Ones(N, R);
  state_.refresh_derived();

  state_.smooth_prec.resize(R);
  for (int r = 0; r < R; ++r)
    state_.smooth_prec[r] = std::min(
        std::max(1.0, state_.score_var[r]), config_.smooth_prec_upper);

  for (auto& b : blocks_) b.psi = b.B * state_.eigen_coefs;
  sweep_index_ = 0;
}

void FpcaGibbs::rebuild_component_cache(int r) {
  for (auto& b : blocks_)
    b.psi.col(r).noalias() = b.B * state_.eigen_coefs.col(r);
}

void FpcaGibbs::refresh_caches() {
  for (auto& b : blocks_) b.psi = b.B * state_.eigen_coefs;
  state_.refresh_derived();
}

Eigen::VectorXd FpcaGibbs::residual_full(const SubjectBlock& b) const {
  const Eigen::Index i = &b - blocks_.data();
  Eigen::VectorXd r = b.y - b.psi * state_.scores.row(i).transpose();
  if (p_ > 0) r.noalias() -= b.X * state_.beta;
  if (config_.concurrent != ConcurrentPolicy::kNone &&
      b.concurrent.size() == b.y.size())
    r -= state_.concurrent_coef * b.concurrent;
  return r;
}

void FpcaGibbs::sample_eigenfunction(int r) {
  const int k = basis_.dimension();
  const int R = config_.n_components;
  const double inv_noise = 1.0 / state_.noise_var;

  Eigen::MatrixXd q = state_.smooth_prec[r] * penalty_;
  Eigen::VectorXd l = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(blocks_.size()); ++i) {
    const auto& b = blocks_[static_cast<std::size_t>(i)];
    if (b.y.size() == 0) continue;
    const double z = state_.scores(i, r);
    q.noalias() += (z * z * inv_noise) * b.BtB;
    // residual excluding component r
    Eigen::VectorXd e = residual_full(b) + z * b.psi.col(r);
    l.noalias() += (z * inv_noise) * (b.B.transpose() * e);
  }
  q.diagonal().array() += kJitter;

  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigenfunction " << r << " precision not positive definite after "
        << kJitter << " jitter (diagonal range " << q.diagonal().minCoeff()
        << " .. " << q.diagonal().maxCoeff() << ")";
    throw NumericalError(msg.str());
  }

  const Eigen::VectorXd mu = llt.solve(l);
  Eigen::VectorXd draw =
      mu + llt.matrixU().solve(rng_.normal_vector(k));

  // conditioning by kriging: project onto the grid-orthogonality constraints
  if (R > 1) {
    Eigen::MatrixXd others(k, R - 1);
    int at = 0;
    for (int s = 0; s < R; ++s)
      if (s != r) others.col(at++) = state_.eigen_coefs.col(s);
    const Eigen::MatrixXd c = others.transpose() * basis_.inner_gram();
    const Eigen::MatrixXd qinv_ct = llt.solve(c.transpose());
    const Eigen::MatrixXd s = c * qinv_ct;
    Eigen::LLT<Eigen::MatrixXd> slt(s);
    if (slt.info() != Eigen::Success)
      throw NumericalError("constraint system not positive definite in "
                           "eigenfunction update");
    draw -= qinv_ct * slt.solve(c * draw);
  }

  if (config_.normalize_components) {
    const double norm2 = basis_.grid_norm2(draw);
    if (!(norm2 > 0.0))
      throw NumericalError("eigenfunction collapsed to zero grid norm");
    const double nrm = std::sqrt(norm2);

    double before_max = 0.0;
    if (config_.check_invariants) {
      // fitted contribution of component r before the rescale pair
      for (Eigen::Index i = 0;
           i < static_cast<Eigen::Index>(blocks_.size()); ++i) {
        const auto& b = blocks_[static_cast<std::size_t>(i)];
        if (b.y.size() == 0) continue;
        const Eigen::VectorXd before =
            (b.B * draw) * state_.scores(i, r);
        const Eigen::VectorXd after =
            (b.B * (draw / nrm)) * (state_.scores(i, r) * nrm);
        before_max =
            std::max(before_max, (before - after).cwiseAbs().maxCoeff());
      }
      diag_.max_refit_deviation =
          std::max(diag_.max_refit_deviation, before_max);
    }

    draw /= nrm;
    state_.scores.col(r) *= nrm;
    if (basis_.grid_mean(draw) < 0.0) {
      draw = -draw;
      state_.scores.col(r) = -state_.scores.col(r);
      state_.mean_ctrl[r] = -state_.mean_ctrl[r];
      state_.mean_trt[r] = -state_.mean_trt[r];
    }
  }
  state_.eigen_coefs.col(r) = draw;
  rebuild_component_cache(r);

  if (!config_.fix_smooth_prec) {
    const double rate = 0.5 * draw.dot(penalty_ * draw);
    const double lo = state_.score_var[r];
    const double hi = config_.smooth_prec_upper;
    if (lo >= hi) {
      state_.smooth_prec[r] = hi;
      ++diag_.degenerate_smooth_intervals;
    } else {
      state_.smooth_prec[r] = rng_.truncated_gamma(
          0.5 * (basis_.num_knots() + 1), rate, lo, hi);
    }
  }
}

void FpcaGibbs::sample_scores() {
  const int R = config_.n_components;
  const double inv_noise = 1.0 / state_.noise_var;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(blocks_.size()); ++i) {
    const auto& b = blocks_[static_cast<std::size_t>(i)];
    Eigen::VectorXd e = residual_full(b);
    for (int r = 0; r < R; ++r) {
      const double lam2 = state_.score_var[r];
      const double xi = state_.local_scale(i, r);
      const double prior_mean =
          b.z == 1 ? state_.mean_trt[r] : state_.mean_ctrl[r];
      double prec = xi / lam2;
      double lin = prior_mean * xi / lam2;
      if (b.y.size() > 0) {
        e += b.psi.col(r) * state_.scores(i, r);  // add component r back
        prec += b.psi.col(r).squaredNorm() * inv_noise;
        lin += b.psi.col(r).dot(e) * inv_noise;
      }
      const double var = 1.0 / prec;
      const double draw = var * lin + std::sqrt(var) * rng_.normal();
      if (b.y.size() > 0) e -= b.psi.col(r) * draw;
      state_.scores(i, r) = draw;
    }
  }
}

void FpcaGibbs::sample_group_means() {
  const int R = config_.n_components;
  for (int r = 0; r < R; ++r) {
    const double lam2 = state_.score_var[r];
    double prec[2], lin[2];
    for (int z = 0; z < 2; ++z) {
      prec[z] = 1.0 / state_.mean_var[r];
      lin[z] = 0.0;
    }
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(blocks_.size());
         ++i) {
      const int z = blocks_[static_cast<std::size_t>(i)].z;
      const double xi = state_.local_scale(i, r);
      prec[z] += xi / lam2;
      lin[z] += state_.scores(i, r) * xi / lam2;
    }
    state_.mean_ctrl[r] =
        lin[0] / prec[0] + rng_.normal() / std::sqrt(prec[0]);
    state_.mean_trt[r] =
        lin[1] / prec[1] + rng_.normal() / std::sqrt(prec[1]);
  }
}

void FpcaGibbs::sample_beta() {
  if (p_ == 0) return;
  const double inv_noise = 1.0 / state_.noise_var;
  Eigen::MatrixXd q = xtx_ * inv_noise;
  q.diagonal().array() += 1.0 / (config_.coef_prior_sd * config_.coef_prior_sd);
  Eigen::VectorXd l = Eigen::VectorXd::Zero(p_);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(blocks_.size()); ++i) {
    const auto& b = blocks_[static_cast<std::size_t>(i)];
    if (b.y.size() == 0) continue;
    Eigen::VectorXd e = b.y - b.psi * state_.scores.row(i).transpose();
    if (config_.concurrent != ConcurrentPolicy::kNone &&
        b.concurrent.size() == b.y.size())
      e -= state_.concurrent_coef * b.concurrent;
    l.noalias() += inv_noise * (b.X.transpose() * e);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success)
    throw NumericalError("beta precision not positive definite");
  state_.beta = llt.solve(l) + llt.matrixU().solve(rng_.normal_vector(p_));
}

void FpcaGibbs::sample_concurrent_coef() {
  if (config_.concurrent != ConcurrentPolicy::kSample) return;
  const double inv_noise = 1.0 / state_.noise_var;
  double prec = 1.0 / (config_.coef_prior_sd * config_.coef_prior_sd);
  double lin = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(blocks_.size()); ++i) {
    const auto& b = blocks_[static_cast<std::size_t>(i)];
    if (b.y.size() == 0 || b.concurrent.size() != b.y.size()) continue;
    Eigen::VectorXd e = b.y - b.psi * state_.scores.row(i).transpose();
    if (p_ > 0) e.noalias() -= b.X * state_.beta;
    prec += b.concurrent.squaredNorm() * inv_noise;
    lin += b.concurrent.dot(e) * inv_noise;
  }
  state_.concurrent_coef = lin / prec + rng_.normal() / std::sqrt(prec);
}

void FpcaGibbs::update_shrink_hyper(double& value, int which,
                                    const Eigen::VectorXd& deltas,
                                    bool first_increment, double prior_shape) {
  auto log_target = [&](double a) {
    double lp = (prior_shape - 1.0) * std::log(a) - a;  // Ga(shape, 1) prior
    if (first_increment) {
      lp += (a - 1.0) * std::log(deltas[0]) - std::lgamma(a);
    } else {
      for (Eigen::Index r = 1; r < deltas.size(); ++r)
        lp += (a - 1.0) * std::log(deltas[r]) - std::lgamma(a);
    }
    return lp;
  };
  const double proposal =
      value * std::exp(mh_sd_[which] * rng_.normal());
  const double log_ratio = log_target(proposal) - log_target(value) +
                           std::log(proposal) - std::log(value);
  if (!std::isfinite(log_ratio)) {
    ++diag_.nonfinite_mh_rejections;
    return;
  }
  if (std::log(rng_.uniform_pos()) < log_ratio) {
    value = proposal;
    ++mh_accept_window_[which];
    if (sweep_index_ >= config_.burn_in) ++mh_accept_total_[which];
  }
}

void FpcaGibbs::sample_variances() {
  const int R = config_.n_components;
  const auto N = static_cast<Eigen::Index>(blocks_.size());
  const double v = config_.t_mix_df;

  // (a) observation noise precision
  double ss = 0.0;
  for (const auto& b : blocks_) ss += residual_full(b).squaredNorm();
  const double shape =
      config_.noise_prior_shape + 0.5 * static_cast<double>(total_obs_);
  const double rate = config_.noise_prior_rate + 0.5 * ss;
  if (!(shape > 0.0) || !(rate > 0.0))
    throw NumericalError("degenerate noise-variance conditional");
  state_.noise_var = 1.0 / rng_.gamma(shape, rate);

  // centered weighted score residuals: xi_{i,r} (score - arm mean)^2
  Eigen::VectorXd score_ss(R);
  for (int r = 0; r < R; ++r) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const double mean = blocks_[static_cast<std::size_t>(i)].z == 1
                              ? state_.mean_trt[r]
                              : state_.mean_ctrl[r];
      const double d = state_.scores(i, r) - mean;
      acc += state_.local_scale(i, r) * d * d;
    }
    score_ss[r] = acc;
  }
  Eigen::VectorXd mean_ss(R);
  for (int r = 0; r < R; ++r)
    mean_ss[r] = state_.mean_ctrl[r] * state_.mean_ctrl[r] +
                 state_.mean_trt[r] * state_.mean_trt[r];

  // (b) mean-variance ladder increments (leave-one-out products)
  for (int l = 0; l < R; ++l) {
    const double a =
        l == 0 ? state_.a_mean1 : state_.a_mean2;
    double rate_l = 1.0;
    double prod = 1.0;
    for (int r = 0; r < R; ++r) {
      if (r != l) prod *= state_.shrink_mean[r];
      if (r >= l) rate_l += 0.5 * prod * mean_ss[r];
    }
    const double shape_l = a + static_cast<double>(R - l);
    state_.shrink_mean[l] = rng_.gamma(shape_l, rate_l);
  }

  // (c) score-variance ladder increments
  for (int l = 0; l < R; ++l) {
    const double a = l == 0 ? state_.a_score1 : state_.a_score2;
    double rate_l = 1.0;
    double prod = 1.0;
    for (int r = 0; r < R; ++r) {
      if (r != l) prod *= state_.shrink_score[r];
      if (r >= l) rate_l += 0.5 * prod * score_ss[r];
    }
    const double shape_l =
        a + 0.5 * static_cast<double>(N) * static_cast<double>(R - l);
    state_.shrink_score[l] = rng_.gamma(shape_l, rate_l);
  }
  state_.refresh_derived();

  // (d) t-mixture local scales
  const double floor = config_.local_scale_floor;
  for (int r = 0; r < R; ++r) {
    const double lam2 = state_.score_var[r];
    for (Eigen::Index i = 0; i < N; ++i) {
      const double mean = blocks_[static_cast<std::size_t>(i)].z == 1
                              ? state_.mean_trt[r]
                              : state_.mean_ctrl[r];
      const double d = state_.scores(i, r) - mean;
      const double shape = 0.5 * (v + 1.0);
      const double rate = 0.5 * (v + d * d / lam2);
      state_.local_scale(i, r) =
          floor > 0.0 ? rng_.lower_truncated_gamma(shape, rate, floor)
                      : rng_.gamma(shape, rate);
    }
  }

  // (e) Metropolis-Hastings for the ladder hyperparameters
  update_shrink_hyper(state_.a_score1, 0, state_.shrink_score, true,
                      config_.a_score1_prior_shape);
  update_shrink_hyper(state_.a_score2, 1, state_.shrink_score, false,
                      config_.a_score2_prior_shape);
  update_shrink_hyper(state_.a_mean1, 2, state_.shrink_mean, true,
                      config_.a_mean1_prior_shape);
  update_shrink_hyper(state_.a_mean2, 3, state_.shrink_mean, false,
                      config_.a_mean2_prior_shape);

  // adapt proposal scales toward 20-40% acceptance during burn-in
  ++mh_window_count_;
  if (sweep_index_ < config_.burn_in &&
      mh_window_count_ >= config_.mh_adapt_interval) {
    for (int w = 0; w < 4; ++w) {
      const double rate_w = static_cast<double>(mh_accept_window_[w]) /
                            static_cast<double>(mh_window_count_);
      if (rate_w < 0.2)
        mh_sd_[w] *= 0.8;
      else if (rate_w > 0.4)
        mh_sd_[w] *= 1.25;
      mh_sd_[w] = std::clamp(mh_sd_[w], 1e-3, 3.0);
      mh_accept_window_[w] = 0;
    }
    mh_window_count_ = 0;
  }
}

void FpcaGibbs::check_orthonormality() {
  const int R = config_.n_components;
  for (int r = 0; r < R; ++r) {
    for (int s = 0; s <= r; ++s) {
      const double ip = basis_.grid_inner(state_.eigen_coefs.col(r),
                                          state_.eigen_coefs.col(s));
      const double target = (r == s) ? 1.0 : 0.0;
      diag_.max_ortho_deviation =
          std::max(diag_.max_ortho_deviation, std::abs(ip - target));
    }
  }
}

void FpcaGibbs::sweep() {
  for (int r = 0; r < config_.n_components; ++r) sample_eigenfunction(r);
  sample_scores();
  sample_group_means();
  sample_beta();
  sample_variances();
  if (config_.concurrent == ConcurrentPolicy::kSample) sample_concurrent_coef();
  if (config_.check_invariants && config_.normalize_components)
    check_orthonormality();
  ++sweep_index_;
}

void FpcaGibbs::set_concurrent_values(std::vector<Eigen::VectorXd> values,
                                      int source_draw_index) {
  if (values.size() != blocks_.size())
    throw DataError("concurrent values: subject count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != blocks_[i].y.size())
      throw DataError("concurrent values: observation count mismatch for "
                      "subject index " + std::to_string(i));
    if (!values[i].allFinite())
      throw NumericalError("imputed mediator values are not finite");
    blocks_[i].concurrent = std::move(values[i]);
  }
  concurrent_source_ = source_draw_index;
}

void FpcaGibbs::prior_draw() {
  if (!(config_.noise_prior_shape > 0.0) || !(config_.noise_prior_rate > 0.0))
    throw UsageError("prior_draw requires a proper noise precision prior");
  if (!config_.fix_smooth_prec)
    throw UsageError("prior_draw requires fix_smooth_prec (the smoothness "
                     "precision has no free-standing prior)");
  if (!(config_.penalty_ridge > 0.0))
    throw UsageError("prior_draw requires a positive penalty ridge");
  const int k = basis_.dimension();
  const int R = config_.n_components;
  const auto N = static_cast<Eigen::Index>(blocks_.size());
  const double v = config_.t_mix_df;

  state_.a_score1 = rng_.gamma(config_.a_score1_prior_shape, 1.0);
  state_.a_score2 = rng_.gamma(config_.a_score2_prior_shape, 1.0);
  state_.a_mean1 = rng_.gamma(config_.a_mean1_prior_shape, 1.0);
  state_.a_mean2 = rng_.gamma(config_.a_mean2_prior_shape, 1.0);

  state_.shrink_score.resize(R);
  state_.shrink_mean.resize(R);
  for (int r = 0; r < R; ++r) {
    state_.shrink_score[r] =
        rng_.gamma(r == 0 ? state_.a_score1 : state_.a_score2, 1.0);
    state_.shrink_mean[r] =
        rng_.gamma(r == 0 ? state_.a_mean1 : state_.a_mean2, 1.0);
  }
  state_.refresh_derived();

  state_.local_scale.resize(N, R);
  for (Eigen::Index i = 0; i < N; ++i)
    for (int r = 0; r < R; ++r)
      state_.local_scale(i, r) =
          config_.local_scale_floor > 0.0
              ? rng_.lower_truncated_gamma(0.5 * v, 0.5 * v,
                                           config_.local_scale_floor)
              : rng_.gamma(0.5 * v, 0.5 * v);

  state_.mean_ctrl.resize(R);
  state_.mean_trt.resize(R);
  for (int r = 0; r < R; ++r) {
    const double sd = std::sqrt(state_.mean_var[r]);
    state_.mean_ctrl[r] = sd * rng_.normal();
    state_.mean_trt[r] = sd * rng_.normal();
  }

  state_.scores.resize(N, R);
  for (Eigen::Index i = 0; i < N; ++i) {
    const int z = blocks_[static_cast<std::size_t>(i)].z;
    for (int r = 0; r < R; ++r) {
      const double mean = z == 1 ? state_.mean_trt[r] : state_.mean_ctrl[r];
      const double sd =
          std::sqrt(state_.score_var[r] / state_.local_scale(i, r));
      state_.scores(i, r) = mean + sd * rng_.normal();
    }
  }

  state_.beta = config_.coef_prior_sd * rng_.normal_vector(p_);
  state_.noise_var =
      1.0 / rng_.gamma(config_.noise_prior_shape, config_.noise_prior_rate);

  // phi_r ~ N(0, (h_r * penalty)^{-1}) with the ridge-proper penalty
  if (state_.smooth_prec.size() != R) {
    state_.smooth_prec.resize(R);
    state_.smooth_prec.setOnes();
  }
  state_.eigen_coefs.resize(k, R);
  Eigen::LLT<Eigen::MatrixXd> pl(penalty_);
  if (pl.info() != Eigen::Success)
    throw NumericalError("penalty (+ridge) not positive definite");
  for (int r = 0; r < R; ++r)
    state_.eigen_coefs.col(r) =
        pl.matrixU().solve(rng_.normal_vector(k)) /
        std::sqrt(state_.smooth_prec[r]);

  state_.concurrent_coef = config_.concurrent == ConcurrentPolicy::kFixed
                               ? config_.concurrent_fixed_value
                               : 0.0;
  refresh_caches();
  sweep_index_ = 0;
}

void FpcaGibbs::simulate_observations() {
  const double sd = std::sqrt(state_.noise_var);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(blocks_.size()); ++i) {
    auto& b = blocks_[static_cast<std::size_t>(i)];
    if (b.y.size() == 0) continue;
    Eigen::VectorXd mean = b.psi * state_.scores.row(i).transpose();
    if (p_ > 0) mean.noalias() += b.X * state_.beta;
    if (config_.concurrent != ConcurrentPolicy::kNone &&
        b.concurrent.size() == b.y.size())
      mean += state_.concurrent_coef * b.concurrent;
    for (Eigen::Index j = 0; j < b.y.size(); ++j)
      b.y[j] = mean[j] + sd * rng_.normal();
  }
}

FpcaDraw FpcaGibbs::snapshot() const {
  FpcaDraw d;
  d.eigen_coefs = state_.eigen_coefs;
  d.scores = state_.scores;
  d.mean_ctrl = state_.mean_ctrl;
  d.mean_trt = state_.mean_trt;
  d.beta = state_.beta;
  d.noise_var = state_.noise_var;
  d.score_var = state_.score_var;
  d.concurrent_coef = state_.concurrent_coef;
  d.mediator_draw_index = concurrent_source_;
  // sorted-descending variance shares
  Eigen::VectorXd shares = state_.score_var / state_.score_var.sum();
  std::sort(shares.data(), shares.data() + shares.size(),
            std::greater<double>());
  d.fev = shares;
  return d;
}

void FpcaGibbs::finalize_diagnostics(int post_burn_sweeps) {
  const double denom = std::max(post_burn_sweeps, 1);
  diag_.accept_a_score1 = static_cast<double>(mh_accept_total_[0]) / denom;
  diag_.accept_a_score2 = static_cast<double>(mh_accept_total_[1]) / denom;
  diag_.accept_a_mean1 = static_cast<double>(mh_accept_total_[2]) / denom;
  diag_.accept_a_mean2 = static_cast<double>(mh_accept_total_[3]) / denom;
}

FpcaPosterior run_fpca_chain(const LongitudinalDataset& data, ObsRole role,
                             const SplineBasis& basis, const FpcaConfig& cfg,
                             std::uint64_t user_seed, RngStream stream,
                             const ProgressFn& progress,
                             const PreSweepFn& pre_sweep) {
  FpcaGibbs engine(data, role, basis, cfg, stream);
  // Sweep 0's concurrent values are installed before initialization so the
  // component fit starts from the gamma-adjusted residual.
  if (pre_sweep) pre_sweep(engine, 0);
  engine.init();

  FpcaPosterior post;
  post.role = role == ObsRole::kMediator ? "mediator" : "outcome";
  post.knots = basis.knots();
  post.grid_size = basis.grid_size();
  post.flavor = basis.flavor();
  post.config = cfg;
  post.seed = user_seed;
  post.time_scale = data.time_scale;
  post.n_subjects = data.num_subjects();
  post.draws.reserve(
      static_cast<std::size_t>((cfg.iterations - cfg.burn_in) / cfg.thin));

  Eigen::VectorXd fev_sum;
  for (int s = 0; s < cfg.iterations; ++s) {
    if (pre_sweep && s > 0) pre_sweep(engine, s);
    try {
      engine.sweep();
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (sweep " +
                           std::to_string(s) + ")");
    }
    // record floor((iterations - burn_in) / thin) draws, the last at the
    // final sweep when thin divides the post-burn count
    if (s >= cfg.burn_in && (s - cfg.burn_in) % cfg.thin == cfg.thin - 1) {
      post.draws.push_back(engine.snapshot());
      const auto& fev = post.draws.back().fev;
      if (fev_sum.size() == 0)
        fev_sum = fev;
      else
        fev_sum += fev;
    }
    if (progress && ((s + 1) % 500 == 0 || s + 1 == cfg.iterations))
      progress(s + 1, cfg.iterations);
  }

  engine.finalize_diagnostics(cfg.iterations - cfg.burn_in);
  post.diagnostics = engine.diagnostics();
  if (!post.draws.empty()) {
    fev_sum /= static_cast<double>(post.draws.size());
    post.diagnostics.mean_fev.assign(fev_sum.data(),
                                     fev_sum.data() + fev_sum.size());
    // warn when the top R-1 sorted components explain < 90% on average,
    // i.e. reaching 90% requires the full component budget
    if (cfg.n_components > 1) {
      double cum = 0.0;
      for (int r = 0; r + 1 < cfg.n_components; ++r) cum += fev_sum[r];
      post.diagnostics.fev_warning = cum < 0.9;
    }
  }
  return post;
}

}  // namespace medfpca
