#include "rtgam/smooth_basis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "rtgam/error.hpp"

namespace rtgam {

namespace {

double eta(double r) { return r * r * r / 12.0; }

std::vector<double> quantiles(const std::vector<double>& sorted, int k) {
  std::vector<double> out(static_cast<std::size_t>(k));
  const double last = static_cast<double>(sorted.size() - 1);
  for (int j = 0; j < k; ++j) {
    const double h = last * j / (k - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    out[static_cast<std::size_t>(j)] = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  }
  out.front() = sorted.front();
  out.back() = sorted.back();
  return out;
}

bool strictly_increasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

}  // namespace

std::vector<double> choose_knots(std::span<const double> values, int k) {
  if (k < 3) throw Error(ErrorCode::InvalidArgument, "basis dimension must be at least 3");
  std::vector<double> sorted(values.begin(), values.end());
  if (std::any_of(sorted.begin(), sorted.end(), [](double v) { return !std::isfinite(v); }))
    throw Error(ErrorCode::InvalidArgument, "covariate contains non-finite values");
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::Data, "fewer than " + std::to_string(k) + " distinct covariate values");
  auto knots = quantiles(sorted, k);
  if (!strictly_increasing(knots)) knots = quantiles(distinct, k);
  return knots;
}

SmoothSpec make_spec(std::string covariate, std::span<const double> values, int k) {
  SmoothSpec spec;
  spec.covariate = std::move(covariate);
  spec.k = k;
  spec.knots = choose_knots(values, k);
  spec.range_min = spec.knots.front();
  spec.range_max = spec.knots.back();
  return spec;
}

Eigen::MatrixXd SmoothTerm::raw_basis(std::span<const double> values) const {
  const int k = spec_.k;
  const double width = spec_.range_max - spec_.range_min;
  Eigen::MatrixXd radial(static_cast<Eigen::Index>(values.size()), k);
  Eigen::VectorXd linear(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = (values[i] - spec_.range_min) / width;
    for (int j = 0; j < k; ++j) {
      const double kappa = (spec_.knots[static_cast<std::size_t>(j)] - spec_.range_min) / width;
      radial(static_cast<Eigen::Index>(i), j) = eta(std::abs(u - kappa));
    }
    linear(static_cast<Eigen::Index>(i)) = u;
  }
  Eigen::MatrixXd out(radial.rows(), k - 1);
  out.leftCols(k - 2) = radial * constraint_null_;
  out.col(k - 2) = linear;
  return out;
}

Eigen::MatrixXd SmoothTerm::basis(std::span<const double> values) const {
  Eigen::MatrixXd b = raw_basis(values);
  b.rowwise() -= offset_.transpose();
  return b;
}

void SmoothTerm::build_penalties() {
  const int k = spec_.k;
  const double width = spec_.range_max - spec_.range_min;
  Eigen::MatrixXd e(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double a = (spec_.knots[static_cast<std::size_t>(i)] - spec_.range_min) / width;
      const double b = (spec_.knots[static_cast<std::size_t>(j)] - spec_.range_min) / width;
      e(i, j) = eta(std::abs(a - b));
    }
  Eigen::MatrixXd radial = constraint_null_.transpose() * e * constraint_null_;
  radial = 0.5 * (radial + radial.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(radial);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  if (!(top > 0) || bottom <= 1e-12 * top)
    throw Error(ErrorCode::Numeric, "rank-deficient thin-plate construction for " + spec_.covariate);

  penalty_ = Eigen::MatrixXd::Zero(k - 1, k - 1);
  penalty_.topLeftCorner(k - 2, k - 2) = penalty_scale_ * radial;
  shrinkage_ = Eigen::MatrixXd::Zero(k - 1, k - 1);
  shrinkage_(k - 2, k - 2) = 0.1 * penalty_scale_ * bottom;
}

SmoothTerm SmoothTerm::build(std::span<const double> values, SmoothSpec spec) {
  const int k = spec.k;
  if (k < 3) throw Error(ErrorCode::InvalidArgument, "basis dimension must be at least 3");
  if (spec.knots.size() != static_cast<std::size_t>(k))
    throw Error(ErrorCode::InvalidArgument, "knot count does not match basis dimension");
  if (!strictly_increasing(spec.knots))
    throw Error(ErrorCode::InvalidArgument, "knots must be strictly increasing");
  if (!(spec.range_max > spec.range_min) || spec.knots.front() < spec.range_min ||
      spec.knots.back() > spec.range_max)
    throw Error(ErrorCode::InvalidArgument, "knots must lie within the data range");
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "no covariate values");

  SmoothTerm term;
  term.spec_ = std::move(spec);
  const double width = term.spec_.range_max - term.spec_.range_min;
  Eigen::MatrixXd t(k, 2);
  for (int j = 0; j < k; ++j) {
    t(j, 0) = 1.0;
    t(j, 1) = (term.spec_.knots[static_cast<std::size_t>(j)] - term.spec_.range_min) / width;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(t);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
  term.constraint_null_ = q.rightCols(k - 2);

  const Eigen::MatrixXd raw = term.raw_basis(values);
  term.offset_ = raw.colwise().mean().transpose();
  term.design_ = raw.rowwise() - term.offset_.transpose();

  // Build once unscaled to measure the penalty norm, then rescale.
  term.penalty_scale_ = 1.0;
  term.build_penalties();
  const double xtx_norm = (term.design_.transpose() * term.design_).norm();
  const double s_norm = term.penalty_.norm();
  if (!(xtx_norm > 0)) throw Error(ErrorCode::Numeric, "degenerate design for " + term.spec_.covariate);
  term.penalty_scale_ = xtx_norm / s_norm;
  term.build_penalties();
  return term;
}

SmoothTerm SmoothTerm::restore(SmoothSpec spec, Eigen::MatrixXd constraint_null,
                               Eigen::VectorXd centering_offset, double penalty_scale) {
  const int k = spec.k;
  if (spec.knots.size() != static_cast<std::size_t>(k) || constraint_null.rows() != k ||
      constraint_null.cols() != k - 2 || centering_offset.size() != k - 1)
    throw Error(ErrorCode::Parse, "inconsistent smooth term dimensions for " + spec.covariate);
  SmoothTerm term;
  term.spec_ = std::move(spec);
  term.constraint_null_ = std::move(constraint_null);
  term.offset_ = std::move(centering_offset);
  term.penalty_scale_ = penalty_scale;
  term.build_penalties();
  return term;
}

SmoothTerm::Evaluation SmoothTerm::evaluate(const Eigen::VectorXd& coefficients,
                                            std::span<const double> at) const {
  if (coefficients.size() != columns())
    throw Error(ErrorCode::InvalidArgument,
                "expected " + std::to_string(columns()) + " coefficients for " + spec_.covariate);
  Evaluation out;
  out.values = basis(at) * coefficients;
  out.extrapolated.reserve(at.size());
  for (double x : at) out.extrapolated.push_back(outside_range(x));
  return out;
}

}  // namespace rtgam
