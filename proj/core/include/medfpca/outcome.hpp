#pragma once

#include <cstdint>

#include "medfpca/fpca.hpp"

namespace medfpca {

/// Fits the outcome trajectory model (one chain) with a concurrent mediator
/// term, keeping the already-fitted mediator posterior fixed (two-stage
/// inference: outcome sweeps never feed back into the mediator fit).
///
/// Before every sweep s the mediator posterior draw selected by
/// cfg.draw_policy (cycling s mod D, or uniform at random) is imputed onto
/// each subject's outcome times and installed as the concurrent values.
/// cfg.concurrent defaults to sampling gamma; ConcurrentPolicy::kFixed holds
/// gamma at cfg.concurrent_fixed_value instead and consumes no extra
/// randomness.
///
/// Requires: mediator_posterior.role == "mediator", at least one draw, and a
/// subject count matching `data` (both fits must use the same dataset).
FpcaPosterior run_outcome_chain(const LongitudinalDataset& data,
                                const SplineBasis& outcome_basis,
                                const FpcaPosterior& mediator_posterior,
                                FpcaConfig cfg, std::uint64_t user_seed,
                                RngStream stream,
                                const ProgressFn& progress = nullptr);

}  // namespace medfpca
