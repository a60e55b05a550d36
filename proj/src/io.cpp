#include "oscint/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace oscint {

std::string format_g17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

static bool single_series(const ExperimentResult& r) {
  std::set<std::string> names;
  for (const ExpRow& row : r.rows) names.insert(row.series);
  return names.size() <= 1;
}

std::string csv_text(const ExperimentResult& r) {
  std::string out;
  bool flat = single_series(r);
  if (!flat) out += "series,";
  out += r.param_name + "," + r.value_name + ",err\n";
  for (const ExpRow& row : r.rows) {
    if (!flat) {
      out += row.series;
      out += ',';
    }
    out += format_g17(row.param);
    out += ',';
    out += format_g17(row.value);
    out += ',';
    out += format_g17(row.err);
    out += '\n';
  }
  return out;
}

std::string git_describe() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[128];
  std::string out;
  while (fgets(buf, sizeof buf, pipe)) out += buf;
  int rc = pclose(pipe);
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back())))
    out.pop_back();
  if (rc != 0 || out.empty()) return "unknown";
  return out;
}

std::string write_experiment(const ExperimentResult& r, const QuadSpec& spec,
                             const std::string& dir, const std::string& stem) {
  namespace fs = std::filesystem;
  fs::path base(dir);
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());

  fs::path csv_path = base / (stem + ".csv");
  {
    std::ofstream f(csv_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + csv_path.string());
    f << csv_text(r);
    if (!f) throw std::runtime_error("write failed: " + csv_path.string());
  }

  nlohmann::json meta;
  meta["experiment"] = r.name;
  meta["seed"] = r.seed;
  meta["converged"] = r.converged;
  meta["wall_time_s"] = r.wall_time;
  meta["params"] = nlohmann::json::object();
  for (const auto& [k, v] : r.params) meta["params"][k] = v;
  meta["metrics"] = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics) meta["metrics"][k] = v;
  meta["quad"] = {{"rel_tol", spec.rel_tol},
                  {"abs_tol", spec.abs_tol},
                  {"max_panels", spec.max_panels},
                  {"nodes_per_panel", spec.nodes_per_panel}};
  meta["build"] = git_describe();

  fs::path meta_path = base / (stem + ".meta.json");
  std::ofstream f(meta_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + meta_path.string());
  f << meta.dump(2) << '\n';
  if (!f) throw std::runtime_error("write failed: " + meta_path.string());
  return csv_path.string();
}

}  // namespace oscint
