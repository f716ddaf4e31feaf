#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rtgam/panel.hpp"
#include "rtgam/rt_estimator.hpp"
#include "rtgam/smooth_basis.hpp"

namespace rtgam {

std::vector<double> log_grid(double lo, double hi, int points);

struct ModelSpec {
  std::vector<std::string> smooths{"mobility", "temperature", "humidity", "pm25"};
  int k = 6;
  // Fixed-effect levels; empty means every province in the panel.
  std::vector<std::string> provinces;
  std::vector<double> lambda_grid = log_grid(1e-6, 1e6, 61);
  int sweeps = 3;
  bool shrinkage = true;
};

// Covariate names understood by the model: mobility, temperature, humidity,
// pm25.
double covariate_value(const ObservationRow& row, std::string_view name);
bool is_covariate(std::string_view name);

struct BlockSpan {
  std::string name;
  int start = 0;
  int size = 0;
};

// Columns are [province indicators | smooth blocks in ModelSpec::smooths order].
struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> provinces;
  std::vector<SmoothTerm> terms;
  std::vector<BlockSpan> blocks;
  std::vector<ObservationRow> rows;
  std::size_t excluded = 0;
};

Design assemble_design(const Panel& panel, const RtSet& rt, const ModelSpec& spec);

struct Penalty {
  int start = 0;
  Eigen::MatrixXd matrix;
};

std::vector<Penalty> design_penalties(const Design& design, bool shrinkage);

struct PenalizedFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd fitted;
  double rss = 0;
  // Diagonal of (X'X + S)^-1 X'X; block EDFs are sums over column spans.
  Eigen::VectorXd edf_diagonal;
  double total_edf = 0;
  double sigma2 = 0;
  Eigen::MatrixXd covariance;  // (X'X + S)^-1 * sigma2

  double edf(int start, int size) const { return edf_diagonal.segment(start, size).sum(); }
};

// Solves (X'X + sum_j lambda_j S_j) beta = X'y through a QR factorization of
// the design stacked on sqrt(lambda_j) S_j^(1/2).
PenalizedFit fit_penalized(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::span<const Penalty> penalties, std::span<const double> lambdas);

// GCV(lambda) = n RSS / (n - tr A)^2, evaluated on the QR-reduced problem so
// each call costs O(p^3) regardless of n.
class GcvCriterion {
 public:
  GcvCriterion(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               std::span<const Penalty> penalties);

  // +infinity when the penalized system is singular.
  double score(std::span<const double> lambdas) const;
  std::size_t rows() const { return n_; }

 private:
  std::size_t n_ = 0;
  int p_ = 0;
  Eigen::MatrixXd r_;          // p x p triangular factor of X
  Eigen::VectorXd qty_;        // Q'y
  double outside_rss_ = 0;     // ||y - Q Q'y||^2
  std::vector<int> starts_;
  std::vector<Eigen::MatrixXd> roots_;  // S_j^(1/2), rows x block size
};

struct GcvSelection {
  std::vector<double> lambdas;
  std::vector<std::size_t> grid_index;
  double score = 0;
};

// Coordinate descent over penalties on a fixed grid. Each step sets one lambda
// to the grid argmin with the others held; ties, up to a relative tolerance of
// 1e-13 of mean(y^2), go to the larger lambda.
// `order` lists penalty indices in visiting order (empty: 0..m-1). Starts from
// the grid midpoint.
GcvSelection select_lambdas_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                std::span<const Penalty> penalties,
                                std::span<const double> grid, int sweeps,
                                std::span<const int> order = {});

struct TermSummary {
  std::string name;
  double lambda = 0;
  double edf = 0;
  double wald = 0;
  int rank = 0;
  double p_value = 1;
};

inline constexpr double kPValueFloor = 1e-300;

struct FittedGam {
  ModelSpec spec;
  std::vector<std::string> provinces;
  std::vector<SmoothTerm> terms;
  std::vector<BlockSpan> blocks;
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  std::vector<TermSummary> term_summaries;
  double sigma2 = 0;
  double total_edf = 0;
  double gcv_score = 0;
  double adjusted_r2 = 0;
  double rss = 0;
  double tss = 0;
  std::size_t n = 0;
  std::size_t excluded_rows = 0;
  // Training response and fitted values; not serialized.
  Eigen::VectorXd response;
  Eigen::VectorXd fitted;

  int term_index(std::string_view name) const;  // -1 when absent
  int province_index(std::string_view province) const;
  double intercept(std::string_view province) const;
  double mean_intercept() const;
  Eigen::VectorXd term_coefficients(int term) const;
  Eigen::MatrixXd term_covariance(int term) const;
};

FittedGam fit_design(Design design, const ModelSpec& spec);
FittedGam fit_gam(const Panel& panel, const RtSet& rt, const ModelSpec& spec);

// Linear predictor for arbitrary rows using each row's own province intercept.
Eigen::VectorXd predict(const FittedGam& model, std::span<const ObservationRow> rows);
// Same, with one shared level in place of the province intercepts.
Eigen::VectorXd predict_with_level(const FittedGam& model, std::span<const ObservationRow> rows,
                                   double level);

}  // namespace rtgam
