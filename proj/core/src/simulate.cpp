#include "medfpca/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "medfpca/errors.hpp"
#include "medfpca/mathutil.hpp"

namespace medfpca {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ScenarioConfig::validate() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(confounder_corr());
  if (es.eigenvalues().minCoeff() <= 1e-12)
    throw UsageError("ScenarioConfig: confounder correlation matrix is not "
                "positive definite");
  if (pois_mediator < 1.0 || pois_outcome < 1.0)
    throw UsageError("ScenarioConfig: Poisson means must be >= 1");
  if (p_treat < 0.0 || p_treat > 1.0)
    throw UsageError("ScenarioConfig: p_treat must be in [0,1]");
  if (sigma_m < 0.0 || sigma_y < 0.0 || sigma_x < 0.0 || sigma_noise < 0.0)
    throw UsageError("ScenarioConfig: scale parameters must be nonnegative");
  if (n_subjects < 1) throw UsageError("ScenarioConfig: n_subjects must be >= 1");
}

Eigen::Matrix3d ScenarioConfig::confounder_corr() const {
  Eigen::Matrix3d s;
  s << 1.0, rho_tm, rho_ty,
       rho_tm, 1.0, rho_my,
       rho_ty, rho_my, 1.0;
  return s;
}

ScenarioConfig scenario_preset(int k) {
  ScenarioConfig cfg;
  cfg.scenario = k;
  switch (k) {
    case 1:
      break;  // all rho zero: both ignorability assumptions hold
    case 2:
      cfg.rho_tm = 0.5;  // treatment-mediator confounding
      break;
    case 3:
      cfg.rho_ty = 0.5;  // treatment-outcome confounding
      break;
    case 4:
      cfg.rho_my = 0.5;  // mediator-outcome confounding
      break;
    default:
      throw UsageError("scenario must be 1, 2, 3, or 4; got " +
                       std::to_string(k));
  }
  return cfg;
}

double truth_mediator_effect(double t) {
  return 0.2 + 2.0 * t + std::sin(kTwoPi * t);
}
double truth_acme(double t) { return truth_mediator_effect(t); }
double truth_direct(double t) {
  return std::cos(kTwoPi * t) + 0.2 * t * t + 3.0 * t;
}
double truth_total(double t) { return truth_acme(t) + truth_direct(t); }

Eigen::VectorXd sample_gp(const std::vector<double>& times, double sigma,
                          RngStream& rng) {
  const auto n = static_cast<Eigen::Index>(times.size());
  if (n == 0) return Eigen::VectorXd();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d = times[static_cast<std::size_t>(i)] -
                       times[static_cast<std::size_t>(j)];
      k(i, j) = k(j, i) = sigma * sigma * std::exp(-8.0 * d * d);
    }
  }
  k.diagonal().array() += 1e-10;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw NumericalError("sample_gp: kernel matrix not positive definite "
                         "after 1e-10 jitter");
  return llt.matrixL() * rng.normal_vector(n);
}

std::pair<LongitudinalDataset, SimulatedTruth> simulate_dataset(
    const ScenarioConfig& cfg) {
  cfg.validate();
  RngStream master = RngStream(cfg.seed).substream("simulate");

  const Eigen::Matrix3d corr = cfg.confounder_corr();
  const Eigen::Matrix3d corr_chol = Eigen::LLT<Eigen::Matrix3d>(corr).matrixL();
  const double z_threshold = normal_quantile(cfg.p_treat);

  LongitudinalDataset data;
  data.covariate_names = {"x1", "x2", "x3"};
  data.horizon = 1.0;
  data.time_scale = 1.0;  // DGP time is already on [0,1]

  SimulatedTruth truth;
  const int kGrid = 101;
  truth.grid.resize(kGrid);
  truth.total.resize(kGrid);
  truth.acme.resize(kGrid);
  truth.direct.resize(kGrid);
  truth.mediator_effect.resize(kGrid);
  for (int g = 0; g < kGrid; ++g) {
    const double t = static_cast<double>(g) / (kGrid - 1);
    truth.grid[static_cast<std::size_t>(g)] = t;
    truth.acme[static_cast<std::size_t>(g)] = truth_acme(t);
    truth.direct[static_cast<std::size_t>(g)] = truth_direct(t);
    truth.total[static_cast<std::size_t>(g)] =
        truth.acme[static_cast<std::size_t>(g)] +
        truth.direct[static_cast<std::size_t>(g)];
    truth.mediator_effect[static_cast<std::size_t>(g)] =
        truth_mediator_effect(t);
  }

  const int width = cfg.n_subjects > 0
      ? static_cast<int>(std::to_string(cfg.n_subjects).size()) : 1;
  for (int i = 0; i < cfg.n_subjects; ++i) {
    RngStream rng = master.substream(static_cast<std::uint64_t>(i));

    // confounder triplet and treatment assignment
    const Eigen::Vector3d c = corr_chol * rng.normal_vector(3);
    const int z = (c[0] <= z_threshold) ? 1 : 0;

    // observation counts (shifted Poisson keeps every subject observed)
    const int n_m = rng.poisson(cfg.pois_mediator) + 1;
    const int n_y = rng.poisson(cfg.pois_outcome) + 1;
    const int n_all = n_m + n_y;

    // pooled uniform grid, then split without replacement
    std::vector<double> pooled(static_cast<std::size_t>(n_all));
    for (auto& t : pooled) t = rng.uniform();
    std::sort(pooled.begin(), pooled.end());
    std::vector<int> idx(static_cast<std::size_t>(n_all));
    for (int j = 0; j < n_all; ++j) idx[static_cast<std::size_t>(j)] = j;
    for (int j = n_all - 1; j > 0; --j) {
      const auto k = static_cast<int>(
          rng.uniform_index(static_cast<std::uint64_t>(j + 1)));
      std::swap(idx[static_cast<std::size_t>(j)],
                idx[static_cast<std::size_t>(k)]);
    }
    std::vector<bool> is_mediator(static_cast<std::size_t>(n_all), false);
    for (int j = 0; j < n_m; ++j)
      is_mediator[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])] =
          true;

    // time-varying covariates, iid across pooled times
    Eigen::MatrixXd x(n_all, 3);
    for (int j = 0; j < n_all; ++j)
      x.row(j) = (cfg.sigma_x * rng.normal_vector(3)).transpose();

    // GP deviations on the pooled grid (mediator needs values at outcome
    // times too, since the outcome depends on the concurrent mediator)
    const Eigen::VectorXd gp_m = sample_gp(pooled, cfg.sigma_m, rng);
    const Eigen::VectorXd gp_y = sample_gp(pooled, cfg.sigma_y, rng);

    Subject subj;
    std::ostringstream sid;
    sid << "s";
    for (int w = static_cast<int>(std::to_string(i + 1).size()); w < width; ++w)
      sid << '0';
    sid << (i + 1);
    subj.id = sid.str();
    subj.treatment = z;
    subj.covariate_steps.assign(3, {});

    SimulatedTruth::SubjectTruth st;
    st.id = subj.id;
    for (int j = 0; j < n_all; ++j) {
      const double t = pooled[static_cast<std::size_t>(j)];
      const double trend_m = 2.0 * t + std::sin(kTwoPi * t);
      const double latent_m = trend_m + truth_mediator_effect(t) * z -
                              x(j, 0) + 0.5 * x(j, 1) + gp_m[j] +
                              cfg.sigma_m * c[1];
      const double trend_y =
          std::cos(kTwoPi * t) + 0.1 * t * t + 2.0 * t;
      const double latent_y = latent_m + trend_y + truth_direct(t) * z -
                              0.5 * x(j, 1) + x(j, 2) + gp_y[j] +
                              cfg.sigma_y * c[2];
      st.times.push_back(t);
      st.latent_m.push_back(latent_m);
      st.latent_y.push_back(latent_y);
      for (int k = 0; k < 3; ++k)
        subj.covariate_steps[static_cast<std::size_t>(k)].push_back(
            {t, x(j, k)});
      if (is_mediator[static_cast<std::size_t>(j)])
        subj.mediator_obs.push_back(
            {t, latent_m + cfg.sigma_noise * rng.normal()});
      else
        subj.outcome_obs.push_back(
            {t, latent_y + cfg.sigma_noise * rng.normal()});
    }
    data.subjects.push_back(std::move(subj));
    truth.subjects.push_back(std::move(st));
  }
  return {std::move(data), std::move(truth)};
}

void write_truth(const SimulatedTruth& truth, const std::string& latent_path,
                 const std::string& curves_path) {
  {
    std::ofstream out(latent_path);
    if (!out) throw DataError("cannot write " + latent_path);
    out << "subject_id,time,latent_M,latent_Y\n";
    for (const auto& s : truth.subjects)
      for (std::size_t j = 0; j < s.times.size(); ++j)
        out << s.id << ',' << fmt(s.times[j]) << ',' << fmt(s.latent_m[j])
            << ',' << fmt(s.latent_y[j]) << '\n';
  }
  {
    std::ofstream out(curves_path);
    if (!out) throw DataError("cannot write " + curves_path);
    out << "time,total,acme,direct,mediator_effect\n";
    for (std::size_t g = 0; g < truth.grid.size(); ++g)
      out << fmt(truth.grid[g]) << ',' << fmt(truth.total[g]) << ','
          << fmt(truth.acme[g]) << ',' << fmt(truth.direct[g]) << ','
          << fmt(truth.mediator_effect[g]) << '\n';
  }
}

}  // namespace medfpca
