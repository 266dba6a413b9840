#include "medfpca/mediator.hpp"

#include "medfpca/errors.hpp"

namespace medfpca {

FpcaPosterior run_mediator_chain(const LongitudinalDataset& data,
                                 const SplineBasis& basis, FpcaConfig cfg,
                                 std::uint64_t user_seed, RngStream stream,
                                 const ProgressFn& progress) {
  cfg.concurrent = ConcurrentPolicy::kNone;
  return run_fpca_chain(data, ObsRole::kMediator, basis, cfg, user_seed,
                        stream, progress);
}

Eigen::VectorXd impute_process(const FpcaDraw& draw, const SplineBasis& basis,
                               const Subject& subject, int subject_index,
                               const std::vector<double>& times) {
  if (subject_index < 0 || subject_index >= draw.scores.rows())
    throw DataError("impute_process: subject index out of range");
  const Eigen::VectorXd coef =
      draw.eigen_coefs * draw.scores.row(subject_index).transpose();
  Eigen::VectorXd out = basis.matrix(times) * coef;
  if (draw.beta.size() > 0) {
    for (std::size_t j = 0; j < times.size(); ++j)
      out[static_cast<Eigen::Index>(j)] +=
          subject.covariates_at(times[j]).dot(draw.beta);
  }
  return out;
}

}  // namespace medfpca
