#include "medfpca/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "medfpca/errors.hpp"
#include "medfpca/mathutil.hpp"

namespace medfpca {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

Eigen::MatrixXd basis_on_grid(const FpcaPosterior& post,
                              const std::vector<double>& grid) {
  return post.basis().matrix(grid);
}

}  // namespace

std::vector<double> uniform_grid(int n) {
  if (n < 2) throw UsageError("effect grid needs at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    g[static_cast<std::size_t>(j)] =
        static_cast<double>(j) / static_cast<double>(n - 1);
  return g;
}

EffectCurves compute_effect_curves(const FpcaPosterior& mediator_post,
                                   const FpcaPosterior& outcome_post,
                                   const std::vector<double>& grid) {
  if (mediator_post.role != "mediator")
    throw DataError("estimands: first posterior must have role 'mediator' "
                    "(got '" + mediator_post.role + "')");
  if (outcome_post.role != "outcome")
    throw DataError("estimands: second posterior must have role 'outcome' "
                    "(got '" + outcome_post.role + "')");
  if (mediator_post.draws.empty() || outcome_post.draws.empty())
    throw DataError("estimands: posterior with no draws");
  if (mediator_post.n_subjects != outcome_post.n_subjects)
    throw DataError("estimands: posteriors were fitted to different datasets "
                    "(subject counts differ)");
  if (std::abs(mediator_post.time_scale - outcome_post.time_scale) >
      1e-12 * std::max(1.0, std::abs(mediator_post.time_scale)))
    throw DataError("estimands: posteriors carry different time scales");
  if (grid.empty()) throw UsageError("estimands: empty time grid");

  const auto n_med = static_cast<Eigen::Index>(mediator_post.draws.size());
  const auto n_out = static_cast<Eigen::Index>(outcome_post.draws.size());
  const auto T = static_cast<Eigen::Index>(grid.size());

  const Eigen::MatrixXd b_med = basis_on_grid(mediator_post, grid);
  const Eigen::MatrixXd b_out = basis_on_grid(outcome_post, grid);

  EffectCurves c;
  c.times = grid;
  c.time_scale = outcome_post.time_scale;
  c.mediator.resize(n_med, T);
  c.total.resize(n_out, T);
  c.acme.resize(n_out, T);
  c.direct.resize(n_out, T);

  for (Eigen::Index d = 0; d < n_med; ++d) {
    const auto& m = mediator_post.draws[static_cast<std::size_t>(d)];
    c.mediator.row(d) =
        (b_med * (m.eigen_coefs * (m.mean_trt - m.mean_ctrl))).transpose();
  }

  for (Eigen::Index d = 0; d < n_out; ++d) {
    const auto& o = outcome_post.draws[static_cast<std::size_t>(d)];
    const int pair = o.mediator_draw_index;
    if (pair < 0 || pair >= n_med)
      throw DataError(
          "estimands: outcome draw " + std::to_string(d) +
          " references mediator draw " + std::to_string(pair) +
          ", outside the mediator posterior (" + std::to_string(n_med) +
          " draws); refit the outcome model against this mediator posterior");
    const auto& m = mediator_post.draws[static_cast<std::size_t>(pair)];

    const Eigen::VectorXd direct_curve =
        b_out * (o.eigen_coefs * (o.mean_trt - o.mean_ctrl));
    const Eigen::VectorXd med_curve =
        b_med * (m.eigen_coefs * (m.mean_trt - m.mean_ctrl));
    c.direct.row(d) = direct_curve.transpose();
    c.acme.row(d) = (o.concurrent_coef * med_curve).transpose();
    c.total.row(d) =
        (direct_curve + o.concurrent_coef * med_curve).transpose();
  }
  return c;
}

CurveSummary summarize_curve(const Eigen::MatrixXd& draws,
                             const std::vector<double>& times_norm,
                             double time_scale, double level) {
  if (draws.rows() < 1) throw DataError("summarize_curve: no draws");
  if (draws.cols() != static_cast<Eigen::Index>(times_norm.size()))
    throw DataError("summarize_curve: grid size mismatch");
  if (!(level > 0.0 && level < 1.0))
    throw UsageError("credible level must lie in (0, 1)");

  const double p_lo = 0.5 * (1.0 - level);
  const double p_hi = 1.0 - p_lo;
  CurveSummary s;
  const auto T = draws.cols();
  s.times.resize(static_cast<std::size_t>(T));
  s.mean.resize(static_cast<std::size_t>(T));
  s.lo.resize(static_cast<std::size_t>(T));
  s.hi.resize(static_cast<std::size_t>(T));
  std::vector<double> col(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index d = 0; d < draws.rows(); ++d)
      col[static_cast<std::size_t>(d)] = draws(d, t);
    std::sort(col.begin(), col.end());
    const auto u = static_cast<std::size_t>(t);
    s.times[u] = times_norm[u] * time_scale;
    s.mean[u] = draws.col(t).mean();
    s.lo[u] = quantile_type7(col, p_lo);
    s.hi[u] = quantile_type7(col, p_hi);
  }
  return s;
}

void write_effect_csv(const std::string& path, const std::string& name,
                      const CurveSummary& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "time,effect,mean,lo95,hi95\n";
  for (std::size_t t = 0; t < s.times.size(); ++t)
    out << fmt(s.times[t]) << ',' << name << ',' << fmt(s.mean[t]) << ','
        << fmt(s.lo[t]) << ',' << fmt(s.hi[t]) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

void write_effects_csv(const std::string& path, const EffectCurves& curves,
                       double level) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "time,effect,mean,lo95,hi95\n";
  const auto emit = [&](const char* name, const Eigen::MatrixXd& draws) {
    const CurveSummary s =
        summarize_curve(draws, curves.times, curves.time_scale, level);
    for (std::size_t t = 0; t < s.times.size(); ++t)
      out << fmt(s.times[t]) << ',' << name << ',' << fmt(s.mean[t]) << ','
          << fmt(s.lo[t]) << ',' << fmt(s.hi[t]) << '\n';
  };
  emit("total", curves.total);
  emit("acme", curves.acme);
  emit("direct", curves.direct);
  emit("mediator", curves.mediator);
  if (!out) throw DataError("write failed for '" + path + "'");
}

std::string effects_table(const EffectCurves& curves,
                          const std::vector<double>& probe_times,
                          double level) {
  // nearest grid column for each probe
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s %-9s %10s %10s %10s\n", "effect",
                "time", "mean", "lo95", "hi95");
  out << buf;
  const struct {
    const char* name;
    const Eigen::MatrixXd* draws;
  } families[] = {{"total", &curves.total},
                  {"acme", &curves.acme},
                  {"direct", &curves.direct},
                  {"mediator", &curves.mediator}};
  for (const auto& fam : families) {
    const CurveSummary s =
        summarize_curve(*fam.draws, curves.times, curves.time_scale, level);
    for (double probe : probe_times) {
      std::size_t best = 0;
      for (std::size_t t = 1; t < curves.times.size(); ++t)
        if (std::abs(curves.times[t] - probe) <
            std::abs(curves.times[best] - probe))
          best = t;
      std::snprintf(buf, sizeof(buf), "%-10s %-9.4g %10.4f %10.4f %10.4f\n",
                    fam.name, s.times[best], s.mean[best], s.lo[best],
                    s.hi[best]);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace medfpca
