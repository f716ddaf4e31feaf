#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtgam/effects.hpp"
#include "rtgam/gam_engine.hpp"
#include "rtgam/panel.hpp"
#include "rtgam/rt_estimator.hpp"
#include "rtgam/synthetic.hpp"

// Delimited-text and JSON encodings of every pipeline artifact. Writers return
// the file content; `manifest` (when non-empty) is recorded as a leading
// "# manifest: NAME" line, which all readers skip.
namespace rtgam::io {

// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(const std::string& line);
std::string format_number(double value);

std::string panel_csv(const Panel& panel, const std::string& manifest = {});
Panel parse_panel_csv(const std::string& text);
Panel read_panel_csv(const std::filesystem::path& path);

std::string diagnostics_csv(std::span<const Diagnostic> diagnostics,
                            const std::string& manifest = {});

// date,province,rt,flag ; undefined values are written as NA.
std::string rt_csv(const RtSet& rt, const std::string& manifest = {});
RtSet parse_rt_csv(const std::string& text);
RtSet read_rt_csv(const std::filesystem::path& path);

std::string summary_csv(const SummaryTable& table, const std::string& manifest = {});
std::string effect_csv(const PartialEffect& effect, const std::string& manifest = {});
std::string province_effects_csv(const FittedGam& model, int grid_size,
                                 const std::string& manifest = {});
std::string cv_csv(const CvReport& report, const std::string& manifest = {});
std::string fit_summary_text(const FittedGam& model, const std::string& manifest = {});

// Source-file encodings (the ingest schemas) of a panel.
std::string cases_csv(const Panel& panel, const std::string& manifest = {});
std::string environment_csv(const Panel& panel, const std::string& manifest = {});
std::string mobility_csv(const Panel& panel, const std::string& manifest = {});
// date,province,rt_true,log_rt_true,f_mobility,f_temperature,f_humidity,f_pm25,intercept
std::string truth_csv(const Scenario& scenario, const std::string& manifest = {});

nlohmann::json model_to_json(const FittedGam& model, const std::string& manifest = {});
FittedGam model_from_json(const nlohmann::json& doc);
FittedGam read_model(const std::filesystem::path& path);

}  // namespace rtgam::io
