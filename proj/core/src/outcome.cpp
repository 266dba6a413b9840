#include "medfpca/outcome.hpp"

#include <string>
#include <vector>

#include "medfpca/errors.hpp"

namespace medfpca {

FpcaPosterior run_outcome_chain(const LongitudinalDataset& data,
                                const SplineBasis& outcome_basis,
                                const FpcaPosterior& mediator_posterior,
                                FpcaConfig cfg, std::uint64_t user_seed,
                                RngStream stream, const ProgressFn& progress) {
  if (mediator_posterior.role != "mediator")
    throw DataError("outcome fit requires a mediator posterior (got role '" +
                    mediator_posterior.role + "')");
  if (mediator_posterior.draws.empty())
    throw DataError("mediator posterior contains no draws");
  if (mediator_posterior.n_subjects != data.num_subjects())
    throw DataError(
        "mediator posterior was fitted to " +
        std::to_string(mediator_posterior.n_subjects) + " subjects but the "
        "dataset has " + std::to_string(data.num_subjects()) +
        "; both stages must use the same dataset");

  if (cfg.concurrent == ConcurrentPolicy::kNone)
    cfg.concurrent = ConcurrentPolicy::kSample;

  const SplineBasis med_basis = mediator_posterior.basis();
  const int n_draws = static_cast<int>(mediator_posterior.draws.size());

  // Per-subject caches at the outcome times: covariate design and the
  // mediator basis, so per-sweep imputation is two small mat-vecs.
  const auto n = data.subjects.size();
  std::vector<Eigen::MatrixXd> x_cache(n), b_cache(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = data.subjects[i];
    std::vector<double> times;
    times.reserve(s.outcome_obs.size());
    for (const auto& o : s.outcome_obs) times.push_back(o.time);
    b_cache[i] = med_basis.matrix(times);
    const auto rows = static_cast<Eigen::Index>(times.size());
    x_cache[i].resize(rows, data.covariate_dim());
    for (Eigen::Index j = 0; j < rows; ++j)
      x_cache[i].row(j) =
          s.covariates_at(times[static_cast<std::size_t>(j)]).transpose();
  }

  // Posterior-mean imputation (the default) regresses on a regressor whose
  // error is uncorrelated with it, so the concurrent coefficient is not
  // attenuated the way per-sweep noisy draws attenuate it; mediator-stage
  // uncertainty still reaches the effect curves through the per-draw
  // contrast pairing recorded below.
  std::vector<Eigen::VectorXd> mean_values;
  if (cfg.draw_policy == MediatorDrawPolicy::kMean) {
    mean_values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      mean_values[i] = Eigen::VectorXd::Zero(b_cache[i].rows());
    for (const FpcaDraw& d : mediator_posterior.draws) {
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd coef =
            d.eigen_coefs *
            d.scores.row(static_cast<Eigen::Index>(i)).transpose();
        mean_values[i] += b_cache[i] * coef;
        if (d.beta.size() > 0) mean_values[i] += x_cache[i] * d.beta;
      }
    }
    for (std::size_t i = 0; i < n; ++i) mean_values[i] /= n_draws;
  }

  auto impute_sweep = [&](FpcaGibbs& engine, int sweep) {
    // The recorded index always cycles so each outcome draw is paired with a
    // definite mediator draw for the effect-curve contrasts.
    int idx = sweep % n_draws;
    if (cfg.draw_policy == MediatorDrawPolicy::kMean) {
      std::vector<Eigen::VectorXd> values = mean_values;
      engine.set_concurrent_values(std::move(values), idx);
      return;
    }
    if (cfg.draw_policy == MediatorDrawPolicy::kRandom)
      idx = static_cast<int>(engine.rng().uniform_index(
          static_cast<std::uint64_t>(n_draws)));
    const FpcaDraw& d =
        mediator_posterior.draws[static_cast<std::size_t>(idx)];
    std::vector<Eigen::VectorXd> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd coef =
          d.eigen_coefs * d.scores.row(static_cast<Eigen::Index>(i)).transpose();
      values[i] = b_cache[i] * coef;
      if (d.beta.size() > 0) values[i] += x_cache[i] * d.beta;
    }
    engine.set_concurrent_values(std::move(values), idx);
  };

  return run_fpca_chain(data, ObsRole::kOutcome, outcome_basis, cfg, user_seed,
                        stream, progress, impute_sweep);
}

}  // namespace medfpca
