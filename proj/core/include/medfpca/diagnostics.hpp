#pragma once

#include <vector>

namespace medfpca {

/// Split-chain potential scale reduction factor. Every chain is halved, the
/// between/within variance ratio is computed over the resulting sub-chains,
/// and sqrt(var_plus / W) is returned. Values near 1 indicate mixing.
/// Returns NaN when fewer than 4 usable values exist per sub-chain or the
/// within-chain variance is zero.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Scalar summary across merged chains for quick reporting.
struct ScalarSummary {
  double mean = 0.0;
  double sd = 0.0;
  double rhat = 0.0;  // NaN when undefined
};

ScalarSummary summarize_scalar(const std::vector<std::vector<double>>& chains);

}  // namespace medfpca
