#pragma once

#include <string>
#include <vector>

#include "medfpca/fpca.hpp"

namespace medfpca {

/// Per-draw effect curves on a shared time grid (normalized times; multiply
/// by time_scale to report). Rows are posterior draws, columns grid points.
///
///   direct(t)   = sum_s (xi1_s - xi0_s) eta_s(t)          outcome components
///   acme(t)     = gamma * sum_r (tau1_r - tau0_r) psi_r(t) paired mediator draw
///   total(t)    = direct(t) + acme(t)  (computed from its own contrast sums,
///                 so total - acme - direct vanishes only up to rounding)
///   mediator(t) = sum_r (tau1_r - tau0_r) psi_r(t)         mediator draws
///
/// total/acme/direct have one row per outcome draw (each paired with the
/// mediator draw that was imputed during that outcome sweep); mediator has
/// one row per mediator draw.
struct EffectCurves {
  std::vector<double> times;  // normalized grid, increasing
  double time_scale = 1.0;
  Eigen::MatrixXd total;
  Eigen::MatrixXd acme;
  Eigen::MatrixXd direct;
  Eigen::MatrixXd mediator;
};

/// Uniform normalized grid with n points spanning [0, 1].
std::vector<double> uniform_grid(int n = 101);

/// Evaluates all four effect families. Throws DataError when the posteriors
/// are mislabeled (roles), empty, fitted to different datasets (subject count
/// or time scale mismatch), or when an outcome draw references a mediator
/// draw outside the mediator posterior.
EffectCurves compute_effect_curves(const FpcaPosterior& mediator_post,
                                   const FpcaPosterior& outcome_post,
                                   const std::vector<double>& grid);

/// Pointwise posterior mean with an equal-tailed credible band.
struct CurveSummary {
  std::vector<double> times;  // original units (normalized * time_scale)
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
};

/// draws is n_draws x n_times; level is the band mass (0.95 -> 2.5%/97.5%).
CurveSummary summarize_curve(const Eigen::MatrixXd& draws,
                             const std::vector<double>& times_norm,
                             double time_scale, double level = 0.95);

/// Writes one effect family: header time,effect,mean,lo95,hi95 with the
/// family name repeated in the effect column.
void write_effect_csv(const std::string& path, const std::string& name,
                      const CurveSummary& s);

/// Writes all four families stacked in one CSV (same columns; effect in
/// {total, acme, direct, mediator}).
void write_effects_csv(const std::string& path, const EffectCurves& curves,
                       double level = 0.95);

/// Human-readable summary at selected normalized probe times (reported in
/// original units).
std::string effects_table(const EffectCurves& curves,
                          const std::vector<double>& probe_times,
                          double level = 0.95);

}  // namespace medfpca
