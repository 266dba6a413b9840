#pragma once

#include <vector>

#include <Eigen/Core>

namespace medfpca {

enum class PenaltyFlavor { kQuadratic, kCubic };

// ---------------------------------------------------------------------------
// Thin-plate spline basis b(t) = [1, t, |t-k_1|^3, ..., |t-k_L|^3] with a
// roughness penalty on the knot block and a dense evaluation grid used for
// the orthonormality constraints and all function inner products.
//
// Grid inner product convention: <f, g> = (1/G) sum_g f(t_g) g(t_g) over the
// G equally spaced grid points on [0,1], so a function with unit L2 norm has
// unit grid norm independent of G.
// ---------------------------------------------------------------------------
class SplineBasis {
public:
  /// Builds the basis from strictly increasing knots in (0,1).
  SplineBasis(std::vector<double> knots, int grid_size = 50,
              PenaltyFlavor flavor = PenaltyFlavor::kQuadratic);

  int dimension() const { return static_cast<int>(knots_.size()) + 2; }
  int num_knots() const { return static_cast<int>(knots_.size()); }
  int grid_size() const { return grid_size_; }
  PenaltyFlavor flavor() const { return flavor_; }
  const std::vector<double>& knots() const { return knots_; }

  /// b(t); length dimension().
  Eigen::VectorXd eval(double t) const;

  /// Rows eval(times[j]); shape n x dimension().
  Eigen::MatrixXd matrix(const std::vector<double>& times) const;

  /// The G equally spaced grid points on [0,1].
  const std::vector<double>& grid_times() const { return grid_times_; }
  /// G x dimension() basis matrix on the grid.
  const Eigen::MatrixXd& grid_matrix() const { return grid_basis_; }
  /// Grid Gram matrix B_G' B_G (unscaled).
  const Eigen::MatrixXd& grid_gram() const { return gram_; }
  /// Inner-product matrix B_G' B_G / G (so phi' K phi is the grid norm^2).
  const Eigen::MatrixXd& inner_gram() const { return inner_gram_; }

  /// Literal roughness penalty: zero polynomial block; knot block
  /// (k_l - k_l')^2 (quadratic) or |k_l - k_l'|^3 (cubic). Symmetric but
  /// indefinite in general.
  const Eigen::MatrixXd& penalty() const { return penalty_; }

  /// Positive-semidefinite projection of the penalty (negative eigenvalues
  /// clipped to zero). This is what the samplers use inside precision
  /// matrices and gamma rates, where an indefinite penalty would be
  /// meaningless (negative prior precision).
  const Eigen::MatrixXd& penalty_psd() const { return penalty_psd_; }

  /// Squared grid norm of the function with coefficients phi.
  double grid_norm2(const Eigen::VectorXd& phi) const;
  /// Grid inner product of two coefficient vectors.
  double grid_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  /// Grid mean of the function with coefficients phi.
  double grid_mean(const Eigen::VectorXd& phi) const;

private:
  std::vector<double> knots_;
  int grid_size_;
  PenaltyFlavor flavor_;
  std::vector<double> grid_times_;
  Eigen::MatrixXd grid_basis_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd inner_gram_;
  Eigen::MatrixXd penalty_;
  Eigen::MatrixXd penalty_psd_;
};

/// Knots at the (l/(L+1))-quantiles, l = 1..L, of the pooled observation
/// times (type-7 quantiles). Ties are perturbed by +1e-9*l to keep the knot
/// sequence strictly increasing. Throws if L exceeds the number of distinct
/// times or if all times coincide.
std::vector<double> make_knots(std::vector<double> times, int L);

/// Literal penalty matrix for a knot vector (see SplineBasis::penalty).
Eigen::MatrixXd penalty_matrix(const std::vector<double>& knots,
                               PenaltyFlavor flavor);

}  // namespace medfpca
