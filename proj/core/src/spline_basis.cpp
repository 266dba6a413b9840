#include "medfpca/spline_basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "medfpca/errors.hpp"
#include "medfpca/mathutil.hpp"

namespace medfpca {

std::vector<double> make_knots(std::vector<double> times, int L) {
  if (times.empty()) throw Error("make_knots: no observation times");
  if (L < 1) throw Error("make_knots: L must be >= 1");
  std::sort(times.begin(), times.end());
  const auto distinct =
      std::unique(times.begin(), times.end()) - times.begin();
  if (static_cast<long>(L) > distinct) {
    std::ostringstream msg;
    msg << "make_knots: requested " << L << " knots but only " << distinct
        << " distinct observation times";
    if (distinct == 1) msg << " (all times identical)";
    throw Error(msg.str());
  }
  // note: quantiles are taken over the full (sorted, duplicated) sample
  std::vector<double> knots(static_cast<std::size_t>(L));
  for (int l = 1; l <= L; ++l) {
    knots[static_cast<std::size_t>(l - 1)] =
        quantile_type7(times, static_cast<double>(l) / (L + 1));
  }
  // perturb ties so the knot sequence is strictly increasing
  for (int l = 1; l < L; ++l) {
    auto& k = knots[static_cast<std::size_t>(l)];
    if (k <= knots[static_cast<std::size_t>(l - 1)])
      k = knots[static_cast<std::size_t>(l - 1)] + 1e-9 * l;
  }
  return knots;
}

Eigen::MatrixXd penalty_matrix(const std::vector<double>& knots,
                               PenaltyFlavor flavor) {
  const int L = static_cast<int>(knots.size());
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(L + 2, L + 2);
  for (int l = 0; l < L; ++l) {
    for (int m = 0; m < L; ++m) {
      const double d = std::abs(knots[static_cast<std::size_t>(l)] -
                                knots[static_cast<std::size_t>(m)]);
      omega(l + 2, m + 2) =
          flavor == PenaltyFlavor::kQuadratic ? d * d : d * d * d;
    }
  }
  return omega;
}

SplineBasis::SplineBasis(std::vector<double> knots, int grid_size,
                         PenaltyFlavor flavor)
    : knots_(std::move(knots)), grid_size_(grid_size), flavor_(flavor) {
  if (knots_.empty()) throw Error("SplineBasis: need at least one knot");
  if (grid_size_ < 2) throw Error("SplineBasis: grid_size must be >= 2");
  for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
    if (!(knots_[i] < knots_[i + 1]))
      throw Error("SplineBasis: knots must be strictly increasing");

  grid_times_.resize(static_cast<std::size_t>(grid_size_));
  for (int g = 0; g < grid_size_; ++g)
    grid_times_[static_cast<std::size_t>(g)] =
        static_cast<double>(g) / (grid_size_ - 1);

  grid_basis_ = matrix(grid_times_);
  gram_ = grid_basis_.transpose() * grid_basis_;
  inner_gram_ = gram_ / static_cast<double>(grid_size_);
  penalty_ = penalty_matrix(knots_, flavor_);

  // PSD projection for use inside precisions: clip negative eigenvalues.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(penalty_);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  penalty_psd_ =
      es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd SplineBasis::eval(double t) const {
  if (!std::isfinite(t)) throw Error("SplineBasis::eval: non-finite t");
  Eigen::VectorXd b(dimension());
  b[0] = 1.0;
  b[1] = t;
  for (int l = 0; l < num_knots(); ++l) {
    const double d = std::abs(t - knots_[static_cast<std::size_t>(l)]);
    b[l + 2] = d * d * d;
  }
  return b;
}

Eigen::MatrixXd SplineBasis::matrix(const std::vector<double>& times) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(times.size()), dimension());
  for (std::size_t j = 0; j < times.size(); ++j)
    out.row(static_cast<Eigen::Index>(j)) = eval(times[j]).transpose();
  return out;
}

double SplineBasis::grid_norm2(const Eigen::VectorXd& phi) const {
  return phi.dot(inner_gram_ * phi);
}

double SplineBasis::grid_inner(const Eigen::VectorXd& a,
                               const Eigen::VectorXd& b) const {
  return a.dot(inner_gram_ * b);
}

double SplineBasis::grid_mean(const Eigen::VectorXd& phi) const {
  return (grid_basis_ * phi).mean();
}

}  // namespace medfpca
