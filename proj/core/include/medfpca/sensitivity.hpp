#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medfpca/fpca.hpp"

namespace medfpca {

/// Moment triple of the outcome/mediator processes at a reference time u
/// (conditional on covariates and treatment):
///   var_m = Var m(u), var_y = Var y(u), cov = Cov(m(u), y(u)).
struct MomentTriple {
  double cov = 0.0;
  double var_m = 0.0;
  double var_y = 0.0;
};

/// Concurrent coefficient implied by a residual correlation rho between the
/// mediator and outcome processes, given the observable moment triple. The
/// identities
///   cov   = gamma * var_m + k
///   var_y = var_e + gamma^2 * var_m + 2 gamma k
///   rho   = k / sqrt(var_e * var_m)
/// pin gamma to
///   gamma(rho) = cov/var_m - rho * sqrt(var_y*var_m - cov^2)
///                              / (var_m * sqrt(1 - rho^2)),
/// the root whose implied k carries the sign of rho. gamma(0) = cov/var_m.
/// Throws UsageError for |rho| >= 1 and NumericalError when the triple is
/// infeasible (var_m <= 0 or var_y*var_m < cov^2).
double gamma_given_rho(double rho, double cov, double var_m, double var_y);

/// Legacy closed form kept for comparison:
///   cov/var_m - sqrt((var_y - rho^2 cov/var_m) / (var_m (1-rho^2))
///               + (cov/var_m)^2)
/// It does not reduce to cov/var_m at rho = 0 (e.g. it returns -1 for
/// cov = 0, var_m = var_y = 1) and is not used by the pipeline.
double gamma_given_rho_printed(double rho, double cov, double var_m,
                               double var_y);

/// Posterior means of the moment triple at normalized reference time u,
/// under the fitted two-stage model (which has k = 0):
///   var_m = sum_r psi_r(u)^2 lambda_r^2         (mediator draw)
///   var_e = sum_s eta_s(u)^2 lambda_{y,s}^2     (outcome draw)
///   var_y = var_e + gamma^2 var_m,  cov = gamma var_m   (paired draws)
MomentTriple estimate_moments(const FpcaPosterior& mediator_post,
                              const FpcaPosterior& outcome_post,
                              double reference_time);

/// Mediated-effect curves re-weighted under assumed residual correlations.
/// For each rho and each outcome draw (paired with its imputed mediator
/// draw), the adjusted coefficient
///   gamma_adj = gamma - rho * sqrt(var_e / var_m) / sqrt(1 - rho^2)
/// (the fitted-model simplification of gamma_given_rho, evaluated at the
/// reference time with that draw's variances) scales the mediator contrast:
///   delta_adj(t) = gamma_adj * sum_r (tau1_r - tau0_r) psi_r(t).
struct SensitivityCurves {
  std::vector<double> rhos;
  std::vector<double> times;  // normalized grid
  double time_scale = 1.0;
  double reference_time = 0.5;           // normalized
  std::vector<Eigen::MatrixXd> delta;    // per rho: n_outcome_draws x T
  std::vector<double> gamma_adj_mean;    // per rho
};

SensitivityCurves sensitivity_curves(const FpcaPosterior& mediator_post,
                                     const FpcaPosterior& outcome_post,
                                     const std::vector<double>& rhos,
                                     const std::vector<double>& grid,
                                     double reference_time = 0.5);

/// Smallest-|rho| value (ties: negative first) whose equal-tailed band at the
/// probe time covers zero; nullopt when none does.
std::optional<double> breakeven_rho(const SensitivityCurves& curves,
                                    double probe_time, double level = 0.95);

/// CSV: rho,time,delta_mean,lo95,hi95 (times in original units).
void write_sensitivity_csv(const std::string& path,
                           const SensitivityCurves& curves,
                           double level = 0.95);

}  // namespace medfpca
