#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace medfpca {

// ---------------------------------------------------------------------------
// Small numerical helpers shared across modules. Everything here is
// deterministic and header-declared so tests can exercise it directly.
// ---------------------------------------------------------------------------

/// Linear-interpolation sample quantile (the R default, type 7).
/// `sorted` must be nondecreasing and nonempty; p in [0,1].
double quantile_type7(const std::vector<double>& sorted, double p);

/// Standard normal quantile function (Wichura's PPND16 algorithm).
/// Accurate to ~1e-15 over (0,1); returns +/-infinity at the endpoints.
double normal_quantile(double p);

/// Standard normal CDF.
double normal_cdf(double x);

/// Regularized lower incomplete gamma P(a, x) = gamma(a,x)/Gamma(a),
/// a > 0, x >= 0. Series expansion for x < a+1, continued fraction otherwise.
double reg_lower_gamma(double a, double x);

/// Asymptotic two-sample Kolmogorov-Smirnov p-value.
/// Inputs are the two samples (unsorted is fine; copies are sorted inside).
double ks_two_sample_pvalue(std::vector<double> x, std::vector<double> y);

/// Pearson correlation of two equal-length vectors.
double pearson_corr(const std::vector<double>& x, const std::vector<double>& y);

double mean_of(const std::vector<double>& x);
double variance_of(const std::vector<double>& x);  // unbiased (n-1)

/// FNV-1a 64-bit hash of a byte string; used for content hashes in manifests
/// and for deriving named RNG substreams.
std::uint64_t fnv1a64(std::string_view bytes);

/// FNV-1a 64-bit hash of a file's contents.
std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace medfpca
