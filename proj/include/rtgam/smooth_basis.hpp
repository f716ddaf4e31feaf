#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rtgam {

struct SmoothSpec {
  std::string covariate;
  int k = 6;
  std::vector<double> knots;
  double range_min = 0;
  double range_max = 1;
};

// k type-7 sample quantiles at probabilities j / (k - 1). Falls back to the
// quantiles of the distinct values when ties collapse knots.
std::vector<double> choose_knots(std::span<const double> values, int k);

SmoothSpec make_spec(std::string covariate, std::span<const double> values, int k = 6);

// Low-rank one-dimensional thin-plate regression spline.
//
// The raw basis at a covariate value u (rescaled to [0, 1] over the training
// range) is
//
//   [ eta(|u - kappa_1|) ... eta(|u - kappa_k|) ] * Z  |  u
//
// with eta(r) = r^3 / 12, kappa the rescaled knots and Z an orthonormal basis
// of the null space of T' where T = [1, kappa]. The intercept column is
// dropped; every remaining column is centered by its training mean, giving
// k - 1 columns that sum to zero over the training sample. The curvature
// penalty is delta' E delta on the radial block (E_ij = eta(|kappa_i -
// kappa_j|)) and zero on the linear column, then scaled so that
// ||S||_F = ||X'X||_F for the training design X.
class SmoothTerm {
 public:
  static SmoothTerm build(std::span<const double> values, SmoothSpec spec);

  // Reassembles a term from its serialized pieces.
  static SmoothTerm restore(SmoothSpec spec, Eigen::MatrixXd constraint_null,
                            Eigen::VectorXd centering_offset, double penalty_scale);

  const SmoothSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.covariate; }
  int columns() const { return spec_.k - 1; }

  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::MatrixXd& penalty() const { return penalty_; }
  // Rank-one penalty on the linear (null space) column: 0.1 times the
  // smallest positive eigenvalue of penalty().
  const Eigen::MatrixXd& shrinkage_penalty() const { return shrinkage_; }
  const Eigen::VectorXd& centering_offset() const { return offset_; }
  const Eigen::MatrixXd& constraint_null() const { return constraint_null_; }
  double penalty_scale() const { return penalty_scale_; }

  double lambda() const { return lambda_; }
  void set_lambda(double lambda) { lambda_ = lambda; }

  // Centered basis rows, one per value.
  Eigen::MatrixXd basis(std::span<const double> values) const;

  bool outside_range(double value) const {
    return value < spec_.range_min || value > spec_.range_max;
  }

  struct Evaluation {
    Eigen::VectorXd values;
    std::vector<bool> extrapolated;
  };

  Evaluation evaluate(const Eigen::VectorXd& coefficients, std::span<const double> at) const;

 private:
  SmoothTerm() = default;
  Eigen::MatrixXd raw_basis(std::span<const double> values) const;
  void build_penalties();

  SmoothSpec spec_;
  Eigen::MatrixXd constraint_null_;  // k x (k - 2)
  Eigen::VectorXd offset_;           // k - 1
  Eigen::MatrixXd design_;           // training rows only; empty after restore()
  Eigen::MatrixXd penalty_;
  Eigen::MatrixXd shrinkage_;
  double penalty_scale_ = 1;
  double lambda_ = 0;
};

}  // namespace rtgam
