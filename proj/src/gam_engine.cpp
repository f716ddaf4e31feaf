#include "rtgam/gam_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <boost/math/special_functions/gamma.hpp>

#include "rtgam/error.hpp"

namespace rtgam {

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0) || !(hi > lo) || points < 2)
    throw Error(ErrorCode::InvalidArgument, "lambda grid needs 0 < lo < hi and at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (points - 1));
  return grid;
}

bool is_covariate(std::string_view name) {
  return name == "mobility" || name == "temperature" || name == "humidity" || name == "pm25";
}

double covariate_value(const ObservationRow& row, std::string_view name) {
  if (name == "mobility") return row.mobility_decrease_pct;
  if (name == "temperature") return row.temperature_c;
  if (name == "humidity") return row.humidity_pct;
  if (name == "pm25") return row.pm25;
  throw Error(ErrorCode::InvalidArgument, "unknown covariate: " + std::string(name));
}

namespace {

void check_spec(const ModelSpec& spec) {
  if (spec.smooths.empty()) throw Error(ErrorCode::InvalidArgument, "model needs at least one smooth");
  std::set<std::string> seen;
  for (const auto& s : spec.smooths) {
    if (!is_covariate(s)) throw Error(ErrorCode::InvalidArgument, "unknown covariate: " + s);
    if (!seen.insert(s).second) throw Error(ErrorCode::InvalidArgument, "duplicate smooth: " + s);
  }
  if (spec.lambda_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty lambda grid");
  for (std::size_t i = 0; i < spec.lambda_grid.size(); ++i)
    if (!(spec.lambda_grid[i] > 0) || (i > 0 && !(spec.lambda_grid[i] > spec.lambda_grid[i - 1])))
      throw Error(ErrorCode::InvalidArgument, "lambda grid must be positive and increasing");
  if (spec.sweeps < 1) throw Error(ErrorCode::InvalidArgument, "sweeps must be >= 1");
}

// Rows of sqrt(D) V' for S = V D V', negative eigenvalues clipped at zero.
Eigen::MatrixXd penalty_root(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (s + s.transpose()));
  const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()(i) > 1e-14 * top && eig.eigenvalues()(i) > 0) keep.push_back(i);
  Eigen::MatrixXd root(static_cast<Eigen::Index>(keep.size()), s.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto i = keep[r];
    root.row(static_cast<Eigen::Index>(r)) =
        std::sqrt(eig.eigenvalues()(i)) * eig.eigenvectors().col(i).transpose();
  }
  return root;
}

void check_penalties(Eigen::Index p, std::span<const Penalty> penalties,
                     std::span<const double> lambdas) {
  if (penalties.size() != lambdas.size())
    throw Error(ErrorCode::InvalidArgument, "one lambda per penalty required");
  for (std::size_t j = 0; j < penalties.size(); ++j) {
    const auto& pen = penalties[j];
    if (pen.matrix.rows() != pen.matrix.cols() || pen.start < 0 ||
        pen.start + pen.matrix.rows() > p)
      throw Error(ErrorCode::InvalidArgument, "penalty block outside the design");
    if (!(lambdas[j] >= 0)) throw Error(ErrorCode::InvalidArgument, "lambdas must be >= 0");
  }
}

// Inverse of A'A from a column-pivoted QR of A.
Eigen::MatrixXd gram_inverse(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
  const auto p = qr.cols();
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = rinv * rinv.transpose();
  const auto& perm = qr.colsPermutation();
  return perm * inner * perm.transpose();
}

}  // namespace

Design assemble_design(const Panel& panel, const RtSet& rt, const ModelSpec& spec) {
  check_spec(spec);
  if (spec.k < 3) throw Error(ErrorCode::InvalidArgument, "basis dimension must be at least 3");
  Design d;
  d.provinces = spec.provinces.empty() ? panel.provinces() : spec.provinces;
  if (d.provinces.empty()) throw Error(ErrorCode::InvalidArgument, "model needs at least one province");
  std::vector<int> row_province;
  std::vector<double> response;
  for (std::size_t p = 0; p < d.provinces.size(); ++p) {
    const auto& province = d.provinces[p];
    if (!panel.contains(province))
      throw Error(ErrorCode::Data, "province " + province + " not in panel");
    const RtSeries* series = find_series(rt, province);
    if (!series)
      throw Error(ErrorCode::Data, "province " + province + " has no R_t series");
    std::map<Date, std::size_t> at;
    for (std::size_t i = 0; i < series->dates.size(); ++i) at[series->dates[i]] = i;
    for (const auto& row : panel.rows_for(province)) {
      auto it = at.find(row.date);
      if (it == at.end() || !series->usable(it->second)) {
        ++d.excluded;
        continue;
      }
      const double value = series->rt[it->second];
      if (!(value > 0))
        throw Error(ErrorCode::Data, "non-positive R_t for " + province + " on " + format_date(row.date));
      d.rows.push_back(row);
      row_province.push_back(static_cast<int>(p));
      response.push_back(std::log(value));
    }
  }
  if (d.rows.empty()) throw Error(ErrorCode::Data, "no rows with a usable R_t");

  const auto n = static_cast<Eigen::Index>(d.rows.size());
  const auto n_prov = static_cast<Eigen::Index>(d.provinces.size());
  int start = static_cast<int>(n_prov);
  for (const auto& name : spec.smooths) {
    std::vector<double> values;
    values.reserve(d.rows.size());
    for (const auto& row : d.rows) values.push_back(covariate_value(row, name));
    d.terms.push_back(SmoothTerm::build(values, make_spec(name, values, spec.k)));
    d.blocks.push_back({name, start, d.terms.back().columns()});
    start += d.terms.back().columns();
  }

  d.X = Eigen::MatrixXd::Zero(n, start);
  d.y = Eigen::Map<const Eigen::VectorXd>(response.data(), n);
  for (Eigen::Index i = 0; i < n; ++i) d.X(i, row_province[static_cast<std::size_t>(i)]) = 1.0;
  for (std::size_t j = 0; j < d.terms.size(); ++j)
    d.X.block(0, d.blocks[j].start, n, d.blocks[j].size) = d.terms[j].design();
  return d;
}

std::vector<Penalty> design_penalties(const Design& design, bool shrinkage) {
  std::vector<Penalty> out;
  for (std::size_t j = 0; j < design.terms.size(); ++j) {
    Eigen::MatrixXd s = design.terms[j].penalty();
    if (shrinkage) s += design.terms[j].shrinkage_penalty();
    out.push_back({design.blocks[j].start, std::move(s)});
  }
  return out;
}

PenalizedFit fit_penalized(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::span<const Penalty> penalties, std::span<const double> lambdas) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (y.size() != n) throw Error(ErrorCode::InvalidArgument, "response length does not match design");
  check_penalties(p, penalties, lambdas);

  std::vector<Eigen::MatrixXd> roots;
  Eigen::Index extra = 0;
  for (std::size_t j = 0; j < penalties.size(); ++j) {
    roots.push_back(lambdas[j] > 0 ? Eigen::MatrixXd(std::sqrt(lambdas[j]) * penalty_root(penalties[j].matrix))
                                   : Eigen::MatrixXd(0, penalties[j].matrix.cols()));
    extra += roots.back().rows();
  }
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + extra, p);
  aug.topRows(n) = X;
  Eigen::Index row = n;
  for (std::size_t j = 0; j < roots.size(); ++j) {
    aug.block(row, penalties[j].start, roots[j].rows(), roots[j].cols()) = roots[j];
    row += roots[j].rows();
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + extra);
  rhs.head(n) = y;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aug);
  if (qr.rank() < p) throw Error(ErrorCode::Numeric, "singular penalized system");

  PenalizedFit fit;
  fit.beta = qr.solve(rhs);
  fit.fitted = X * fit.beta;
  fit.rss = (y - fit.fitted).squaredNorm();
  const Eigen::MatrixXd inverse = gram_inverse(qr);
  const Eigen::MatrixXd influence = inverse * (X.transpose() * X);
  fit.edf_diagonal = influence.diagonal();
  fit.total_edf = fit.edf_diagonal.sum();
  if (!(static_cast<double>(n) > fit.total_edf))
    throw Error(ErrorCode::Numeric, "effective degrees of freedom reach the sample size");
  fit.sigma2 = fit.rss / (static_cast<double>(n) - fit.total_edf);
  fit.covariance = inverse * fit.sigma2;
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  return fit;
}

GcvCriterion::GcvCriterion(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::span<const Penalty> penalties)
    : n_(static_cast<std::size_t>(X.rows())), p_(static_cast<int>(X.cols())) {
  if (y.size() != X.rows()) throw Error(ErrorCode::InvalidArgument, "response length does not match design");
  if (X.rows() < X.cols()) throw Error(ErrorCode::Data, "fewer rows than design columns");
  std::vector<double> ones(penalties.size(), 1.0);
  check_penalties(X.cols(), penalties, ones);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  r_ = qr.matrixQR().topRows(p_).triangularView<Eigen::Upper>();
  const Eigen::VectorXd qty = qr.householderQ().adjoint() * y;
  qty_ = qty.head(p_);
  outside_rss_ = qty.tail(X.rows() - p_).squaredNorm();
  for (const auto& pen : penalties) {
    starts_.push_back(pen.start);
    roots_.push_back(penalty_root(pen.matrix));
  }
}

double GcvCriterion::score(std::span<const double> lambdas) const {
  if (lambdas.size() != roots_.size()) throw Error(ErrorCode::InvalidArgument, "one lambda per penalty required");
  Eigen::Index extra = 0;
  for (const auto& r : roots_) extra += r.rows();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p_ + extra, p_);
  m.topRows(p_) = r_;
  Eigen::Index row = p_;
  for (std::size_t j = 0; j < roots_.size(); ++j) {
    m.block(row, starts_[j], roots_[j].rows(), roots_[j].cols()) = std::sqrt(lambdas[j]) * roots_[j];
    row += roots_[j].rows();
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p_ + extra);
  rhs.head(p_) = qty_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  if (qr.rank() < p_) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd beta = qr.solve(rhs);
  const double rss = (qty_ - r_ * beta).squaredNorm() + outside_rss_;

  // tr A = || R_x P R_m^-1 ||_F^2
  const Eigen::MatrixXd permuted = r_ * qr.colsPermutation();
  const Eigen::MatrixXd rm = qr.matrixR().topLeftCorner(p_, p_).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd solved =
      rm.transpose().triangularView<Eigen::Lower>().solve(permuted.transpose());
  const double trace = solved.squaredNorm();
  const double n = static_cast<double>(n_);
  if (!(n - trace > 0)) return std::numeric_limits<double>::infinity();
  return n * rss / ((n - trace) * (n - trace));
}

GcvSelection select_lambdas_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                std::span<const Penalty> penalties,
                                std::span<const double> grid, int sweeps,
                                std::span<const int> order) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty lambda grid");
  if (sweeps < 1) throw Error(ErrorCode::InvalidArgument, "sweeps must be >= 1");
  const GcvCriterion gcv(X, y, penalties);
  const std::size_t m = penalties.size();
  std::vector<int> visit(order.begin(), order.end());
  if (visit.empty()) {
    visit.resize(m);
    std::iota(visit.begin(), visit.end(), 0);
  }
  if (visit.size() != m) throw Error(ErrorCode::InvalidArgument, "visiting order must cover every penalty");

  // Scores closer than this to the minimum are ties; it sits far above the
  // rounding error of RSS and far below any meaningful difference.
  const double tie_tol = 1e-13 * y.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(y.size(), 1));
  GcvSelection sel;
  const std::size_t mid = grid.size() / 2;
  sel.grid_index.assign(m, mid);
  sel.lambdas.assign(m, grid[mid]);
  sel.score = m == 0 ? gcv.score(sel.lambdas) : std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int j : visit) {
      const auto jj = static_cast<std::size_t>(j);
      std::vector<double> trial = sel.lambdas;
      std::vector<double> scores(grid.size());
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t g = 0; g < grid.size(); ++g) {
        trial[jj] = grid[g];
        scores[g] = gcv.score(trial);
        if (std::isfinite(scores[g])) best = std::min(best, scores[g]);
      }
      if (!std::isfinite(best))
        throw Error(ErrorCode::Numeric, "every grid point gives a singular penalized system");
      std::size_t best_index = 0;
      for (std::size_t g = 0; g < grid.size(); ++g)
        if (scores[g] <= best + tie_tol) best_index = g;
      sel.grid_index[jj] = best_index;
      sel.lambdas[jj] = grid[best_index];
      sel.score = scores[best_index];
    }
  }
  if (!std::isfinite(sel.score)) throw Error(ErrorCode::Numeric, "GCV undefined for this design");
  return sel;
}

// ---------------------------------------------------------------------------

int FittedGam::term_index(std::string_view name) const {
  for (std::size_t j = 0; j < terms.size(); ++j)
    if (terms[j].name() == name) return static_cast<int>(j);
  return -1;
}

int FittedGam::province_index(std::string_view province) const {
  for (std::size_t i = 0; i < provinces.size(); ++i)
    if (provinces[i] == province) return static_cast<int>(i);
  return -1;
}

double FittedGam::intercept(std::string_view province) const {
  const int i = province_index(province);
  if (i < 0) throw Error(ErrorCode::InvalidArgument, "province not in model: " + std::string(province));
  return beta(i);
}

double FittedGam::mean_intercept() const {
  return beta.head(static_cast<Eigen::Index>(provinces.size())).mean();
}

Eigen::VectorXd FittedGam::term_coefficients(int term) const {
  const auto& b = blocks.at(static_cast<std::size_t>(term));
  return beta.segment(b.start, b.size);
}

Eigen::MatrixXd FittedGam::term_covariance(int term) const {
  const auto& b = blocks.at(static_cast<std::size_t>(term));
  return covariance.block(b.start, b.start, b.size, b.size);
}

namespace {

TermSummary wald_test(const Eigen::MatrixXd& term_design, const Eigen::VectorXd& coef,
                      const Eigen::MatrixXd& cov) {
  // f = X_j b_j lives in the column space of X_j = Q R, so the pseudo-inverse
  // quadratic form reduces to the size x size problem in R.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(term_design);
  const auto q = coef.size();
  const Eigen::MatrixXd r = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
  const Eigen::VectorXd f = r * coef;
  const Eigen::MatrixXd vf = r * cov * r.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (vf + vf.transpose()));
  const double top = eig.eigenvalues().maxCoeff();
  TermSummary t;
  double w = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double ev = eig.eigenvalues()(i);
    if (!(ev > 1e-8 * top)) continue;
    const double proj = eig.eigenvectors().col(i).dot(f);
    w += proj * proj / ev;
    ++t.rank;
  }
  t.wald = w;
  t.p_value = t.rank > 0 ? boost::math::gamma_q(0.5 * t.rank, 0.5 * w) : 1.0;
  t.p_value = std::max(t.p_value, kPValueFloor);
  return t;
}

}  // namespace

FittedGam fit_design(Design design, const ModelSpec& spec) {
  check_spec(spec);
  const auto penalties = design_penalties(design, spec.shrinkage);
  std::vector<int> order(penalties.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return design.terms[static_cast<std::size_t>(a)].name() < design.terms[static_cast<std::size_t>(b)].name();
  });
  const GcvSelection sel =
      select_lambdas_gcv(design.X, design.y, penalties, spec.lambda_grid, spec.sweeps, order);
  const PenalizedFit fit = fit_penalized(design.X, design.y, penalties, sel.lambdas);

  FittedGam model;
  model.spec = spec;
  model.provinces = design.provinces;
  model.blocks = design.blocks;
  model.beta = fit.beta;
  model.covariance = fit.covariance;
  model.sigma2 = fit.sigma2;
  model.total_edf = fit.total_edf;
  model.gcv_score = sel.score;
  model.rss = fit.rss;
  model.n = static_cast<std::size_t>(design.X.rows());
  model.excluded_rows = design.excluded;
  model.response = design.y;
  model.fitted = fit.fitted;
  const double mean = design.y.mean();
  model.tss = (design.y.array() - mean).square().sum();
  const double n = static_cast<double>(model.n);
  model.adjusted_r2 = model.tss > 0 && n > 1
                          ? 1.0 - (fit.rss / (n - fit.total_edf)) / (model.tss / (n - 1.0))
                          : 1.0;
  for (std::size_t j = 0; j < design.terms.size(); ++j) {
    const auto& b = design.blocks[j];
    TermSummary t = wald_test(design.X.middleCols(b.start, b.size), fit.beta.segment(b.start, b.size),
                              fit.covariance.block(b.start, b.start, b.size, b.size));
    t.name = b.name;
    t.lambda = sel.lambdas[j];
    t.edf = fit.edf(b.start, b.size);
    model.term_summaries.push_back(t);
    design.terms[j].set_lambda(sel.lambdas[j]);
  }
  model.terms = std::move(design.terms);
  return model;
}

FittedGam fit_gam(const Panel& panel, const RtSet& rt, const ModelSpec& spec) {
  return fit_design(assemble_design(panel, rt, spec), spec);
}

namespace {

Eigen::VectorXd smooth_part(const FittedGam& model, std::span<const ObservationRow> rows) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  std::vector<double> x(rows.size());
  for (std::size_t j = 0; j < model.terms.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) x[i] = covariate_value(rows[i], model.terms[j].name());
    out += model.terms[j].basis(x) * model.term_coefficients(static_cast<int>(j));
  }
  return out;
}

}  // namespace

Eigen::VectorXd predict(const FittedGam& model, std::span<const ObservationRow> rows) {
  Eigen::VectorXd out = smooth_part(model, rows);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out(static_cast<Eigen::Index>(i)) += model.intercept(rows[i].province);
  return out;
}

Eigen::VectorXd predict_with_level(const FittedGam& model, std::span<const ObservationRow> rows,
                                   double level) {
  Eigen::VectorXd out = smooth_part(model, rows);
  out.array() += level;
  return out;
}

}  // namespace rtgam
