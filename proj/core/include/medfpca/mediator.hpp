#pragma once

#include <cstdint>
#include <vector>

#include "medfpca/fpca.hpp"

namespace medfpca {

/// Fits the mediator trajectory model (one chain). Forces the mediator
/// observation role and disables the concurrent term; all other settings are
/// taken from `cfg`.
FpcaPosterior run_mediator_chain(const LongitudinalDataset& data,
                                 const SplineBasis& basis, FpcaConfig cfg,
                                 std::uint64_t user_seed, RngStream stream,
                                 const ProgressFn& progress = nullptr);

/// Mediator-process value for one subject at arbitrary normalized times under
/// a single posterior draw:
///
///   m_i(t) = X_i(t)' beta + sum_r score_{i,r} psi_r(t)
///
/// Covariates are carried forward from the subject's step functions; throws
/// DataError when a covariate has no measurement by some requested time.
Eigen::VectorXd impute_process(const FpcaDraw& draw, const SplineBasis& basis,
                               const Subject& subject, int subject_index,
                               const std::vector<double>& times);

}  // namespace medfpca
