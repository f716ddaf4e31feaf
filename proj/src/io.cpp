#include "rtgam/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rtgam/error.hpp"
#include "text.hpp"

namespace rtgam::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kPanelHeader =
    "date,province,region,new_cases,new_tests,temperature_c,humidity_pct,pm25,mobility_decrease_pct";
constexpr const char* kRtHeader = "date,province,rt,flag";

std::string preamble(const std::string& manifest) {
  return manifest.empty() ? std::string() : "# manifest: " + manifest + "\n";
}

std::string count(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f", v);
  return buf;
}

// Iterates data lines of one of our own CSV files, checking the header.
template <typename OnRow>
void each_row(const std::string& text, const char* what, const char* header, OnRow on_row) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    if (!have_header) {
      if (detail::split_csv(stripped) != detail::split_csv(header))
        throw Error(ErrorCode::Parse, std::string(what) + ": header mismatch, expected '" + header + "'");
      have_header = true;
      continue;
    }
    on_row(detail::split_csv(stripped), number);
  }
  if (!have_header) throw Error(ErrorCode::Parse, std::string(what) + ": missing header row");
}

double number_field(const std::string& field, const char* what, std::size_t line) {
  auto v = detail::parse_double(field);
  if (!v)
    throw Error(ErrorCode::Parse, std::string(what) + " line " + std::to_string(line) +
                                      ": cannot parse number '" + field + "'");
  return *v;
}

Date date_field(const std::string& field, const char* what, std::size_t line) {
  auto d = parse_date(field);
  if (!d)
    throw Error(ErrorCode::Parse, std::string(what) + " line " + std::to_string(line) +
                                      ": invalid date '" + field + "'");
  return *d;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != c) throw Error(ErrorCode::Parse, "ragged matrix in model file");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const json& values) {
  const auto v = values.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot move output into place: " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) { return detail::split_csv(line); }

std::string format_number(double value) { return detail::format_number(value); }

// --- panel -------------------------------------------------------------------

std::string panel_csv(const Panel& panel, const std::string& manifest) {
  std::string out = preamble(manifest) + kPanelHeader + "\n";
  for (const auto& r : panel.rows()) {
    out += format_date(r.date) + ',' + r.province + ',' + r.region + ',' + count(r.new_cases) + ',' +
           count(r.new_tests) + ',' + format_number(r.temperature_c) + ',' +
           format_number(r.humidity_pct) + ',' + format_number(r.pm25) + ',' +
           format_number(r.mobility_decrease_pct) + '\n';
  }
  return out;
}

Panel parse_panel_csv(const std::string& text) {
  std::vector<ObservationRow> rows;
  each_row(text, "panel", kPanelHeader, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() != 9)
      throw Error(ErrorCode::Parse, "panel line " + std::to_string(line) + ": expected 9 fields");
    ObservationRow r;
    r.date = date_field(f[0], "panel", line);
    r.province = f[1];
    r.region = f[2];
    r.new_cases = number_field(f[3], "panel", line);
    r.new_tests = number_field(f[4], "panel", line);
    r.temperature_c = number_field(f[5], "panel", line);
    r.humidity_pct = number_field(f[6], "panel", line);
    r.pm25 = number_field(f[7], "panel", line);
    r.mobility_decrease_pct = number_field(f[8], "panel", line);
    rows.push_back(std::move(r));
  });
  if (rows.empty()) throw Error(ErrorCode::Data, "panel file has no rows");
  StudyWindow window{rows.front().date, rows.front().date};
  for (const auto& r : rows) {
    window.start = std::min(window.start, r.date);
    window.end = std::max(window.end, r.date);
  }
  return Panel(std::move(rows), window);
}

Panel read_panel_csv(const fs::path& path) { return parse_panel_csv(read_file(path)); }

std::string diagnostics_csv(std::span<const Diagnostic> diagnostics, const std::string& manifest) {
  std::string out = preamble(manifest) + "line,source,reason\n";
  for (const auto& d : diagnostics) {
    std::string reason = d.reason;
    const bool quote = reason.find_first_of(",\"") != std::string::npos;
    if (quote) {
      std::string escaped;
      for (char c : reason) escaped += c == '"' ? std::string("\"\"") : std::string(1, c);
      reason = '"' + escaped + '"';
    }
    out += std::to_string(d.line) + ',' + d.source + ',' + reason + '\n';
  }
  return out;
}

// --- rt -------------------------------------------------------------------------

std::string rt_csv(const RtSet& rt, const std::string& manifest) {
  std::string out = preamble(manifest) + kRtHeader + "\n";
  for (const auto& s : rt)
    for (std::size_t i = 0; i < s.dates.size(); ++i)
      out += format_date(s.dates[i]) + ',' + s.province + ',' + format_number(s.rt[i]) + ',' +
             to_string(s.flags[i]) + '\n';
  return out;
}

RtSet parse_rt_csv(const std::string& text) {
  RtSet out;
  std::map<std::string, std::size_t> index;
  each_row(text, "rt", kRtHeader, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() != 4) throw Error(ErrorCode::Parse, "rt line " + std::to_string(line) + ": expected 4 fields");
    const auto flag = parse_rt_flag(f[3]);
    if (!flag) throw Error(ErrorCode::Parse, "rt line " + std::to_string(line) + ": unknown flag '" + f[3] + "'");
    auto [it, inserted] = index.emplace(f[1], out.size());
    if (inserted) {
      out.emplace_back();
      out.back().province = f[1];
    }
    auto& s = out[it->second];
    s.dates.push_back(date_field(f[0], "rt", line));
    s.rt.push_back(detail::is_missing(f[2]) ? std::nan("") : number_field(f[2], "rt", line));
    s.flags.push_back(*flag);
    if (s.flags.back() != RtFlag::Undefined && !(s.rt.back() > 0))
      throw Error(ErrorCode::Parse, "rt line " + std::to_string(line) + ": defined R_t must be positive");
  });
  return out;
}

RtSet read_rt_csv(const fs::path& path) { return parse_rt_csv(read_file(path)); }

// --- outputs --------------------------------------------------------------------

std::string summary_csv(const SummaryTable& table, const std::string& manifest) {
  std::string out = preamble(manifest) + "variable,mean,sd,min,max,n\n";
  for (const auto& v : table)
    out += v.name + ',' + format_number(v.mean) + ',' + format_number(v.sd) + ',' + format_number(v.min) +
           ',' + format_number(v.max) + ',' + std::to_string(v.n) + '\n';
  return out;
}

std::string effect_csv(const PartialEffect& e, const std::string& manifest) {
  std::string out = preamble(manifest) + "grid,effect,se,lo,hi\n";
  for (std::size_t i = 0; i < e.grid.size(); ++i)
    out += format_number(e.grid[i]) + ',' + format_number(e.effect[i]) + ',' + format_number(e.se[i]) +
           ',' + format_number(e.lo[i]) + ',' + format_number(e.hi[i]) + '\n';
  return out;
}

std::string province_effects_csv(const FittedGam& model, int grid_size, const std::string& manifest) {
  std::string out = preamble(manifest) + "term,grid,effect,se,lo,hi\n";
  for (const auto& term : model.terms) {
    const PartialEffect e = partial_effects(model, term.name(), grid_size);
    for (std::size_t i = 0; i < e.grid.size(); ++i)
      out += e.term + ',' + format_number(e.grid[i]) + ',' + format_number(e.effect[i]) + ',' +
             format_number(e.se[i]) + ',' + format_number(e.lo[i]) + ',' + format_number(e.hi[i]) + '\n';
  }
  return out;
}

std::string cv_csv(const CvReport& report, const std::string& manifest) {
  std::string out = preamble(manifest) + "province,mse,n\n";
  for (const auto& f : report.folds)
    out += f.province + ',' + (f.ok ? format_number(f.mse) : std::string("NA")) + ',' + std::to_string(f.n) + '\n';
  return out;
}

std::string fit_summary_text(const FittedGam& model, const std::string& manifest) {
  std::ostringstream out;
  char buf[256];
  out << preamble(manifest);
  out << "Additive model for log R_t\n";
  out << "  rows used        " << model.n << " (excluded " << model.excluded_rows << ")\n";
  out << "  provinces        " << model.provinces.size() << "\n";
  std::snprintf(buf, sizeof buf, "  adjusted R^2     %.4f\n", model.adjusted_r2);
  out << buf;
  std::snprintf(buf, sizeof buf, "  GCV score        %.6g\n  sigma^2          %.6g\n  total EDF        %.3f\n",
                model.gcv_score, model.sigma2, model.total_edf);
  out << buf;
  out << "\n  term          edf      lambda        Wald   rank  p-value\n";
  for (const auto& t : model.term_summaries) {
    std::snprintf(buf, sizeof buf, "  %-12s %5.2f  %10.3g  %10.4g  %4d  %s%.3g\n", t.name.c_str(), t.edf,
                  t.lambda, t.wald, t.rank, t.p_value <= kPValueFloor ? "<" : "", t.p_value);
    out << buf;
  }
  return out.str();
}

// --- sources --------------------------------------------------------------------

std::string cases_csv(const Panel& panel, const std::string& manifest) {
  std::string out = preamble(manifest) + kCasesHeader + "\n";
  for (const auto& r : panel.rows())
    out += format_date(r.date) + ',' + r.province + ',' + r.region + ',' + count(r.new_cases) + ',' +
           count(r.new_tests) + '\n';
  return out;
}

std::string environment_csv(const Panel& panel, const std::string& manifest) {
  std::string out = preamble(manifest) + kEnvironmentHeader + "\n";
  for (const auto& r : panel.rows())
    out += format_date(r.date) + ',' + r.province + ',' + format_number(r.temperature_c) + ',' +
           format_number(r.humidity_pct) + ',' + format_number(r.pm25) + '\n';
  return out;
}

std::string mobility_csv(const Panel& panel, const std::string& manifest) {
  std::string out = preamble(manifest) + kMobilityHeader + "\n";
  for (const auto& r : panel.rows())
    out += format_date(r.date) + ',' + r.province + ',' + format_number(r.mobility_decrease_pct) + '\n';
  return out;
}

std::string truth_csv(const Scenario& scenario, const std::string& manifest) {
  std::string out = preamble(manifest) +
                    "date,province,rt_true,log_rt_true,f_mobility,f_temperature,f_humidity,f_pm25,intercept\n";
  const auto& rows = scenario.panel.rows();
  std::map<std::string, std::size_t> province_index;
  for (std::size_t p = 0; p < scenario.truth.size(); ++p) province_index[scenario.truth[p].province] = p;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out += format_date(r.date) + ',' + r.province + ',' + format_number(std::exp(scenario.log_rt[i])) + ',' +
           format_number(scenario.log_rt[i]);
    for (const auto& e : scenario.effects) out += ',' + format_number(e(covariate_value(r, e.name)));
    out += ',' + format_number(scenario.intercepts[province_index.at(r.province)]) + '\n';
  }
  return out;
}

// --- model ----------------------------------------------------------------------

json model_to_json(const FittedGam& model, const std::string& manifest) {
  json doc;
  doc["format"] = "rtgam-model";
  doc["format_version"] = 1;
  if (!manifest.empty()) doc["manifest"] = manifest;
  doc["spec"] = {{"smooths", model.spec.smooths},
                 {"k", model.spec.k},
                 {"lambda_grid", model.spec.lambda_grid},
                 {"sweeps", model.spec.sweeps},
                 {"shrinkage", model.spec.shrinkage}};
  doc["provinces"] = model.provinces;
  json terms = json::array();
  for (std::size_t j = 0; j < model.terms.size(); ++j) {
    const auto& t = model.terms[j];
    const Eigen::VectorXd& off = t.centering_offset();
    terms.push_back({{"name", t.name()},
                     {"k", t.spec().k},
                     {"knots", t.spec().knots},
                     {"range_min", t.spec().range_min},
                     {"range_max", t.spec().range_max},
                     {"constraint_null", matrix_json(t.constraint_null())},
                     {"centering_offset", std::vector<double>(off.data(), off.data() + off.size())},
                     {"penalty_scale", t.penalty_scale()},
                     {"lambda", t.lambda()},
                     {"block_start", model.blocks[j].start},
                     {"block_size", model.blocks[j].size}});
  }
  doc["terms"] = terms;
  doc["coefficients"] = std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size());
  doc["covariance"] = matrix_json(model.covariance);
  json tests = json::array();
  for (const auto& t : model.term_summaries)
    tests.push_back({{"name", t.name}, {"lambda", t.lambda}, {"edf", t.edf}, {"wald", t.wald},
                     {"rank", t.rank}, {"p_value", t.p_value}});
  doc["term_summaries"] = tests;
  doc["fit"] = {{"sigma2", model.sigma2},       {"total_edf", model.total_edf},
                {"gcv_score", model.gcv_score}, {"adjusted_r2", model.adjusted_r2},
                {"rss", model.rss},             {"tss", model.tss},
                {"n", model.n},                 {"excluded_rows", model.excluded_rows}};
  return doc;
}

FittedGam model_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "rtgam-model")
      throw Error(ErrorCode::Parse, "not an rtgam model file");
    FittedGam model;
    const auto& spec = doc.at("spec");
    model.spec.smooths = spec.at("smooths").get<std::vector<std::string>>();
    model.spec.k = spec.at("k").get<int>();
    model.spec.lambda_grid = spec.at("lambda_grid").get<std::vector<double>>();
    model.spec.sweeps = spec.at("sweeps").get<int>();
    model.spec.shrinkage = spec.at("shrinkage").get<bool>();
    model.provinces = doc.at("provinces").get<std::vector<std::string>>();
    model.spec.provinces = model.provinces;
    for (const auto& t : doc.at("terms")) {
      SmoothSpec s;
      s.covariate = t.at("name").get<std::string>();
      s.k = t.at("k").get<int>();
      s.knots = t.at("knots").get<std::vector<double>>();
      s.range_min = t.at("range_min").get<double>();
      s.range_max = t.at("range_max").get<double>();
      SmoothTerm term = SmoothTerm::restore(std::move(s), matrix_from(t.at("constraint_null")),
                                            vector_from(t.at("centering_offset")),
                                            t.at("penalty_scale").get<double>());
      term.set_lambda(t.at("lambda").get<double>());
      model.blocks.push_back({term.name(), t.at("block_start").get<int>(), t.at("block_size").get<int>()});
      model.terms.push_back(std::move(term));
    }
    model.beta = vector_from(doc.at("coefficients"));
    model.covariance = matrix_from(doc.at("covariance"));
    for (const auto& t : doc.at("term_summaries"))
      model.term_summaries.push_back({t.at("name").get<std::string>(), t.at("lambda").get<double>(),
                                      t.at("edf").get<double>(), t.at("wald").get<double>(),
                                      t.at("rank").get<int>(), t.at("p_value").get<double>()});
    const auto& fit = doc.at("fit");
    model.sigma2 = fit.at("sigma2").get<double>();
    model.total_edf = fit.at("total_edf").get<double>();
    model.gcv_score = fit.at("gcv_score").get<double>();
    model.adjusted_r2 = fit.at("adjusted_r2").get<double>();
    model.rss = fit.at("rss").get<double>();
    model.tss = fit.at("tss").get<double>();
    model.n = fit.at("n").get<std::size_t>();
    model.excluded_rows = fit.at("excluded_rows").get<std::size_t>();

    const auto p = model.beta.size();
    if (model.covariance.rows() != p || model.covariance.cols() != p)
      throw Error(ErrorCode::Parse, "covariance does not match coefficient count");
    for (const auto& b : model.blocks)
      if (b.start < 0 || b.start + b.size > p) throw Error(ErrorCode::Parse, "term block outside coefficients");
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed model file: ") + e.what());
  }
}

FittedGam read_model(const fs::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, "model file " + path.string() + " is not valid JSON");
  }
  return model_from_json(doc);
}

}  // namespace rtgam::io
