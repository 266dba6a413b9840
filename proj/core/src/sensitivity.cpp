#include "medfpca/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "medfpca/errors.hpp"
#include "medfpca/estimands.hpp"
#include "medfpca/mathutil.hpp"

namespace medfpca {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void check_rho(double rho) {
  if (!(std::abs(rho) < 1.0))
    throw UsageError("residual correlation must satisfy |rho| < 1 (got " +
                     std::to_string(rho) + ")");
}

}  // namespace

double gamma_given_rho(double rho, double cov, double var_m, double var_y) {
  check_rho(rho);
  if (!(var_m > 0.0))
    throw NumericalError("gamma_given_rho: mediator variance must be positive");
  const double disc = var_y * var_m - cov * cov;
  if (disc < 0.0)
    throw NumericalError(
        "gamma_given_rho: infeasible moments (cov^2 exceeds var_y*var_m)");
  return cov / var_m -
         rho * std::sqrt(disc) / (var_m * std::sqrt(1.0 - rho * rho));
}

double gamma_given_rho_printed(double rho, double cov, double var_m,
                               double var_y) {
  check_rho(rho);
  if (!(var_m > 0.0))
    throw NumericalError(
        "gamma_given_rho_printed: mediator variance must be positive");
  const double g0 = cov / var_m;
  const double arg =
      (var_y - rho * rho * g0) / (var_m * (1.0 - rho * rho)) + g0 * g0;
  if (arg < 0.0)
    throw NumericalError(
        "gamma_given_rho_printed: negative square-root argument");
  return g0 - std::sqrt(arg);
}

MomentTriple estimate_moments(const FpcaPosterior& mediator_post,
                              const FpcaPosterior& outcome_post,
                              double reference_time) {
  if (mediator_post.role != "mediator" || outcome_post.role != "outcome")
    throw DataError("estimate_moments: posteriors must be (mediator, outcome)");
  if (mediator_post.draws.empty() || outcome_post.draws.empty())
    throw DataError("estimate_moments: posterior with no draws");

  const SplineBasis med_basis = mediator_post.basis();
  const SplineBasis out_basis = outcome_post.basis();
  const Eigen::VectorXd bm = med_basis.eval(reference_time);
  const Eigen::VectorXd bo = out_basis.eval(reference_time);

  MomentTriple acc;
  const auto n_med = mediator_post.draws.size();
  double n = 0.0;
  for (const auto& o : outcome_post.draws) {
    const int pair = o.mediator_draw_index;
    if (pair < 0 || static_cast<std::size_t>(pair) >= n_med)
      throw DataError("estimate_moments: outcome draw references a mediator "
                      "draw outside the posterior");
    const auto& m = mediator_post.draws[static_cast<std::size_t>(pair)];
    const Eigen::VectorXd psi_u = (bm.transpose() * m.eigen_coefs).transpose();
    const Eigen::VectorXd eta_u = (bo.transpose() * o.eigen_coefs).transpose();
    const double var_m = psi_u.array().square().matrix().dot(m.score_var);
    const double var_e = eta_u.array().square().matrix().dot(o.score_var);
    const double g = o.concurrent_coef;
    acc.var_m += var_m;
    acc.var_y += var_e + g * g * var_m;
    acc.cov += g * var_m;
    n += 1.0;
  }
  acc.var_m /= n;
  acc.var_y /= n;
  acc.cov /= n;
  return acc;
}

SensitivityCurves sensitivity_curves(const FpcaPosterior& mediator_post,
                                     const FpcaPosterior& outcome_post,
                                     const std::vector<double>& rhos,
                                     const std::vector<double>& grid,
                                     double reference_time) {
  if (rhos.empty()) throw UsageError("sensitivity: empty rho list");
  for (double r : rhos) check_rho(r);
  if (!(reference_time >= 0.0 && reference_time <= 1.0))
    throw UsageError("sensitivity: reference time must lie in [0, 1] "
                     "(normalized)");

  // reuse the estimand machinery for pairing/validation and the mediator
  // contrast curves
  const EffectCurves base =
      compute_effect_curves(mediator_post, outcome_post, grid);

  const SplineBasis med_basis = mediator_post.basis();
  const SplineBasis out_basis = outcome_post.basis();
  const Eigen::VectorXd bm = med_basis.eval(reference_time);
  const Eigen::VectorXd bo = out_basis.eval(reference_time);
  const Eigen::MatrixXd b_med_grid = med_basis.matrix(grid);

  const auto n_out = static_cast<Eigen::Index>(outcome_post.draws.size());
  const auto T = static_cast<Eigen::Index>(grid.size());

  SensitivityCurves out;
  out.rhos = rhos;
  out.times = grid;
  out.time_scale = outcome_post.time_scale;
  out.reference_time = reference_time;
  out.delta.assign(rhos.size(), Eigen::MatrixXd(n_out, T));
  out.gamma_adj_mean.assign(rhos.size(), 0.0);

  for (Eigen::Index d = 0; d < n_out; ++d) {
    const auto& o = outcome_post.draws[static_cast<std::size_t>(d)];
    const auto& m = mediator_post.draws[static_cast<std::size_t>(
        o.mediator_draw_index)];
    const Eigen::VectorXd psi_u = (bm.transpose() * m.eigen_coefs).transpose();
    const Eigen::VectorXd eta_u = (bo.transpose() * o.eigen_coefs).transpose();
    const double var_m = psi_u.array().square().matrix().dot(m.score_var);
    const double var_e = eta_u.array().square().matrix().dot(o.score_var);
    if (!(var_m > 1e-12))
      throw NumericalError(
          "sensitivity: mediator process variance vanishes at the reference "
          "time; choose a different --reference-time");
    const Eigen::VectorXd med_contrast =
        b_med_grid * (m.eigen_coefs * (m.mean_trt - m.mean_ctrl));

    for (std::size_t k = 0; k < rhos.size(); ++k) {
      const double rho = rhos[k];
      const double gamma_adj =
          o.concurrent_coef -
          rho * std::sqrt(var_e / var_m) / std::sqrt(1.0 - rho * rho);
      out.delta[k].row(d) = (gamma_adj * med_contrast).transpose();
      out.gamma_adj_mean[k] += gamma_adj;
    }
  }
  for (auto& g : out.gamma_adj_mean) g /= static_cast<double>(n_out);
  return out;
}

std::optional<double> breakeven_rho(const SensitivityCurves& curves,
                                    double probe_time, double level) {
  // nearest grid column
  std::size_t col = 0;
  for (std::size_t t = 1; t < curves.times.size(); ++t)
    if (std::abs(curves.times[t] - probe_time) <
        std::abs(curves.times[col] - probe_time))
      col = t;

  std::vector<std::size_t> order(curves.rhos.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double aa = std::abs(curves.rhos[a]), ab = std::abs(curves.rhos[b]);
    if (aa != ab) return aa < ab;
    return curves.rhos[a] < curves.rhos[b];
  });

  const double p_lo = 0.5 * (1.0 - level);
  for (std::size_t k : order) {
    const auto& m = curves.delta[k];
    std::vector<double> col_draws(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index d = 0; d < m.rows(); ++d)
      col_draws[static_cast<std::size_t>(d)] =
          m(d, static_cast<Eigen::Index>(col));
    std::sort(col_draws.begin(), col_draws.end());
    const double lo = quantile_type7(col_draws, p_lo);
    const double hi = quantile_type7(col_draws, 1.0 - p_lo);
    if (lo <= 0.0 && 0.0 <= hi) return curves.rhos[k];
  }
  return std::nullopt;
}

void write_sensitivity_csv(const std::string& path,
                           const SensitivityCurves& curves, double level) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "rho,time,delta_mean,lo95,hi95\n";
  const double p_lo = 0.5 * (1.0 - level);
  std::vector<double> col;
  for (std::size_t k = 0; k < curves.rhos.size(); ++k) {
    const auto& m = curves.delta[k];
    col.resize(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
      for (Eigen::Index d = 0; d < m.rows(); ++d)
        col[static_cast<std::size_t>(d)] = m(d, t);
      std::sort(col.begin(), col.end());
      out << fmt(curves.rhos[k]) << ','
          << fmt(curves.times[static_cast<std::size_t>(t)] *
                 curves.time_scale)
          << ',' << fmt(m.col(t).mean()) << ','
          << fmt(quantile_type7(col, p_lo)) << ','
          << fmt(quantile_type7(col, 1.0 - p_lo)) << '\n';
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace medfpca
