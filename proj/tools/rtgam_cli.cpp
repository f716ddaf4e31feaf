// rtgam command-line driver. Every stage goes through the C API.
#include <rtgam/rtgam.h>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCommands{"ingest", "rt", "fit", "effects", "cv", "per-province", "simulate", "summary"};

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Failure {
  std::string code;
  std::string message;
};

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

void check(rtgam_status status) {
  if (status != RTGAM_OK) throw Failure{rtgam_status_name(status), rtgam_last_error()};
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{"io", "cannot read " + path.string()};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int size = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &size, EVP_sha256(), nullptr) != 1)
    throw Failure{"internal", "sha256 failed"};
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < size; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out || !(out << content)) throw Failure{"io", "cannot write " + tmp.string()};
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Failure{"io", "cannot move output into place: " + path.string()};
}

// RAII owners for C API handles.
template <typename T, void (*Destroy)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Destroy(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};
using Config = Handle<rtgam_config, rtgam_config_destroy>;
using PanelHandle = Handle<rtgam_panel, rtgam_panel_destroy>;
using RtHandle = Handle<rtgam_rt, rtgam_rt_destroy>;
using ModelHandle = Handle<rtgam_model, rtgam_model_destroy>;

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<int> jobs;
  std::optional<long long> seed;
  std::optional<int> k;
  std::optional<int> grid;
  std::vector<std::string> overrides;
  std::string cases, environment, mobility, panel, rt, model;
};

class Run {
 public:
  Run(std::string command, const Options& options) : command_(std::move(command)), options_(options) {
    check(rtgam_config_create(config_.out()));
    if (!options_.config_path.empty()) {
      add_input("config", options_.config_path);
      check(rtgam_config_load(config_.get(), options_.config_path.c_str()));
    }
    for (const auto& kv : options_.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Failure{"invalid_argument", "--set expects KEY=VALUE, got '" + kv + "'"};
      set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (options_.jobs) set("run.jobs", std::to_string(*options_.jobs));
    if (options_.seed) set("run.seed", std::to_string(*options_.seed));
    if (options_.k) set("model.k", std::to_string(*options_.k));
    if (options_.grid) set("effects.grid", std::to_string(*options_.grid));
    fs::create_directories(out_dir());
  }

  const std::string& manifest_name() const { return manifest_name_; }
  const rtgam_config* config() const { return config_.get(); }
  fs::path out_dir() const { return options_.out_dir; }

  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return out_dir() / name;
  }

  std::string input(const char* role, const std::string& path) {
    if (path.empty()) throw Failure{"invalid_argument", command_ + " requires --" + role};
    if (!fs::exists(path)) throw Failure{"io", std::string("input not found for --") + role + ": " + path};
    add_input(role, path);
    return path;
  }

  std::optional<std::string> config_value(const char* key) const {
    size_t length = 0;
    if (rtgam_config_get(config_.get(), key, nullptr, 0, &length) != RTGAM_OK) return std::nullopt;
    std::string value(length + 1, '\0');
    check(rtgam_config_get(config_.get(), key, value.data(), value.size(), nullptr));
    value.resize(length);
    return value;
  }

  void write_manifest() {
    nlohmann::json doc;
    doc["command"] = command_;
    doc["library_version"] = rtgam_version();
    doc["tool"] = "rtgam";
    nlohmann::json cfg = nlohmann::json::object();
    size_t length = 0;
    check(rtgam_config_dump(config_.get(), nullptr, 0, &length));
    std::string dump(length + 1, '\0');
    check(rtgam_config_dump(config_.get(), dump.data(), dump.size(), nullptr));
    dump.resize(length);
    std::istringstream lines(dump);
    for (std::string line; std::getline(lines, line);) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
    doc["config"] = cfg;
    doc["inputs"] = inputs_;
    nlohmann::json outs = nlohmann::json::array();
    std::set<std::string> seen;
    for (const auto& name : outputs_) {
      if (!seen.insert(name).second) continue;
      const fs::path path = out_dir() / name;
      if (fs::exists(path)) outs.push_back({{"path", name}, {"sha256", sha256_hex(read_bytes(path))}});
    }
    doc["outputs"] = outs;
    write_atomic(out_dir() / manifest_name_, doc.dump(2) + "\n");
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  void set(const std::string& key, const std::string& value) {
    check(rtgam_config_set(config_.get(), key.c_str(), value.c_str()));
  }

  void add_input(const std::string& role, const std::string& path) {
    inputs_[role] = {{"path", path}, {"sha256", sha256_hex(read_bytes(path))}};
  }

  std::string command_;
  const Options& options_;
  std::string manifest_name_ = "manifest_" + command_ + ".json";
  Config config_;
  nlohmann::json inputs_ = nlohmann::json::object();
  std::vector<std::string> outputs_;
};

void load_panel(Run& run, const Options& o, PanelHandle& panel) {
  check(rtgam_panel_read(run.input("panel", o.panel).c_str(), panel.out()));
}

void load_rt(Run& run, const Options& o, RtHandle& rt) {
  check(rtgam_rt_read(run.input("rt", o.rt).c_str(), rt.out()));
}

std::string safe_file_name(std::string s) {
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

void execute(const std::string& command, const Options& o) {
  Run run(command, o);
  const char* m = run.manifest_name().c_str();

  if (command == "ingest") {
    const auto cases = run.input("cases", o.cases);
    const auto env = run.input("environment", o.environment);
    const auto mob = run.input("mobility", o.mobility);
    const auto diagnostics = run.output("diagnostics.csv");
    PanelHandle panel;
    const rtgam_status status = rtgam_panel_ingest(run.config(), cases.c_str(), env.c_str(), mob.c_str(),
                                                   diagnostics.c_str(), m, panel.out());
    if (status != RTGAM_OK) {
      const Failure failure{rtgam_status_name(status), rtgam_last_error()};
      run.write_manifest();
      throw failure;
    }
    check(rtgam_panel_write(panel.get(), run.output("panel.csv").c_str(), m));
    std::cout << "panel: " << rtgam_panel_rows(panel.get()) << " rows, "
              << rtgam_panel_province_count(panel.get()) << " provinces\n";
  } else if (command == "rt") {
    PanelHandle panel;
    load_panel(run, o, panel);
    RtHandle rt;
    check(rtgam_rt_estimate(panel.get(), run.config(), rt.out()));
    check(rtgam_rt_write(rt.get(), run.output("rt.csv").c_str(), m));
    std::cout << "rt: " << rtgam_rt_series_count(rt.get()) << " provinces\n";
  } else if (command == "fit") {
    PanelHandle panel;
    load_panel(run, o, panel);
    RtHandle rt;
    load_rt(run, o, rt);
    ModelHandle model;
    check(rtgam_model_fit(panel.get(), rt.get(), run.config(), model.out()));
    check(rtgam_model_write(model.get(), run.output("model.json").c_str(), m));
    const auto summary = run.output("fit_summary.txt");
    check(rtgam_model_summary_write(model.get(), summary.c_str(), m));
    std::cout << read_bytes(summary);
  } else if (command == "effects") {
    ModelHandle model;
    check(rtgam_model_read(run.input("model", o.model).c_str(), model.out()));
    const int grid = std::stoi(run.config_value("effects.grid").value_or("200"));
    for (size_t i = 0; i < rtgam_model_term_count(model.get()); ++i) {
      const std::string term = rtgam_model_term_name(model.get(), i);
      const auto path = run.output("effect_" + safe_file_name(term) + ".csv");
      check(rtgam_model_effects_write(model.get(), term.c_str(), grid, path.c_str(), m));
    }
  } else if (command == "cv") {
    PanelHandle panel;
    load_panel(run, o, panel);
    RtHandle rt;
    load_rt(run, o, rt);
    check(rtgam_cv_write(panel.get(), rt.get(), run.config(), run.output("cv.csv").c_str(), m));
  } else if (command == "per-province") {
    PanelHandle panel;
    load_panel(run, o, panel);
    RtHandle rt;
    load_rt(run, o, rt);
    const fs::path dir = run.out_dir() / "per_province";
    const auto skipped = run.output("per_province_skipped.csv");
    size_t written = 0;
    check(rtgam_per_province_write(panel.get(), rt.get(), run.config(), dir.c_str(), skipped.c_str(), m,
                                   &written));
    for (size_t i = 0; i < rtgam_panel_province_count(panel.get()); ++i) {
      const std::string name = std::string("per_province/") + rtgam_panel_province(panel.get(), i) + ".csv";
      if (fs::exists(run.out_dir() / name)) run.output(name);
    }
    std::cout << "per-province: " << written << " provinces fitted\n";
  } else if (command == "simulate") {
    check(rtgam_simulate_write(run.config(), run.out_dir().c_str(), m));
    for (const char* name : {"cases.csv", "environment.csv", "mobility.csv", "truth.csv"}) run.output(name);
  } else if (command == "summary") {
    PanelHandle panel;
    load_panel(run, o, panel);
    RtHandle rt;
    if (!o.rt.empty()) load_rt(run, o, rt);
    const auto path = run.output("summary.csv");
    check(rtgam_panel_summary_write(panel.get(), rt.get(), path.c_str(), m));
    std::cout << read_bytes(path);
  }
  run.write_manifest();
}

std::string usage() {
  return "usage: rtgam <command> [--config PATH] [--out DIR] [--jobs N] [--seed N] [inputs]\n"
         "commands:\n"
         "  ingest        --cases F --environment F --mobility F  -> panel.csv, diagnostics.csv\n"
         "  rt            --panel F                               -> rt.csv\n"
         "  fit           --panel F --rt F [--k N]                -> model.json, fit_summary.txt\n"
         "  effects       --model F [--grid N]                    -> effect_<term>.csv\n"
         "  cv            --panel F --rt F                        -> cv.csv\n"
         "  per-province  --panel F --rt F                        -> per_province/<province>.csv\n"
         "  simulate                                              -> cases.csv, environment.csv, mobility.csv, truth.csv\n"
         "  summary       --panel F [--rt F]                      -> summary.csv\n"
         "  --set KEY=VALUE overrides a config key (repeatable).\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << usage();
    return kExitUsage;
  }
  const std::string first = argv[1];
  if (first == "--help" || first == "-h") {
    std::cout << usage();
    return 0;
  }
  if (first == "--version") {
    std::cout << "rtgam " << rtgam_version() << "\n";
    return 0;
  }
  if (std::find(kCommands.begin(), kCommands.end(), first) == kCommands.end()) {
    std::cerr << "error: code=usage message=unknown command '" << one_line(first) << "'\n" << usage();
    return kExitUsage;
  }

  Options o;
  CLI::App app{"rtgam " + first, "rtgam " + first};
  app.add_option("--config", o.config_path, "key-value configuration file");
  app.add_option("--out", o.out_dir, "output directory");
  app.add_option("--jobs", o.jobs, "worker threads (0 = all processors)");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--set", o.overrides, "override a config key, KEY=VALUE");
  if (first == "ingest") {
    app.add_option("--cases", o.cases, "case/test counts file")->required();
    app.add_option("--environment", o.environment, "weather and PM2.5 file")->required();
    app.add_option("--mobility", o.mobility, "mobility file")->required();
  }
  if (first == "rt" || first == "fit" || first == "cv" || first == "per-province" || first == "summary")
    app.add_option("--panel", o.panel, "panel file")->required();
  if (first == "fit" || first == "cv" || first == "per-province")
    app.add_option("--rt", o.rt, "R_t file")->required();
  if (first == "summary") app.add_option("--rt", o.rt, "R_t file");
  if (first == "fit" || first == "cv" || first == "per-province") app.add_option("--k", o.k, "basis dimension");
  if (first == "effects") {
    app.add_option("--model", o.model, "model file")->required();
    app.add_option("--grid", o.grid, "grid points per term");
  }

  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: code=usage message=" << one_line(e.what()) << "\n" << usage();
    return kExitUsage;
  }

  try {
    execute(first, o);
    return 0;
  } catch (const Failure& f) {
    std::cerr << "error: code=" << f.code << " message=" << one_line(f.message) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: code=internal message=" << one_line(e.what()) << "\n";
  }
  return kExitFailure;
}
