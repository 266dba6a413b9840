#include "medfpca/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "medfpca/mathutil.hpp"

namespace medfpca {

double split_rhat(const std::vector<std::vector<double>>& chains) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (chains.empty()) return nan;

  // common sub-chain length: half of the shortest chain
  std::size_t shortest = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) shortest = std::min(shortest, c.size());
  const std::size_t n = shortest / 2;
  if (n < 4) return nan;

  std::vector<std::vector<double>> halves;
  halves.reserve(2 * chains.size());
  for (const auto& c : chains) {
    halves.emplace_back(c.begin(), c.begin() + static_cast<long>(n));
    halves.emplace_back(c.end() - static_cast<long>(n), c.end());
  }

  const double m = static_cast<double>(halves.size());
  const double dn = static_cast<double>(n);
  std::vector<double> means;
  means.reserve(halves.size());
  double w = 0.0;
  for (const auto& h : halves) {
    means.push_back(mean_of(h));
    w += variance_of(h);
  }
  w /= m;
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= dn / (m - 1.0);

  if (!(w > 0.0)) return nan;
  const double var_plus = (dn - 1.0) / dn * w + b / dn;
  return std::sqrt(var_plus / w);
}

ScalarSummary summarize_scalar(const std::vector<std::vector<double>>& chains) {
  ScalarSummary s;
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  if (all.empty()) {
    s.mean = s.sd = s.rhat = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = mean_of(all);
  s.sd = all.size() > 1 ? std::sqrt(variance_of(all)) : 0.0;
  s.rhat = split_rhat(chains);
  return s;
}

}  // namespace medfpca
