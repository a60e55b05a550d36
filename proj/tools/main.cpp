// Command line front end.  Three subcommands:
//
//   check     evaluate the support-set predicates and print a report
//   run       run an experiment described by a JSON config, write CSV + meta
//   plotdata  pull two columns out of a result CSV as gnuplot-ready text
//
// run exits 0 only if the experiment converged and every criterion in the
// config holds; criterion failures exit 2 so regression scripts can tell a
// numerical regression from a crash (exit 1).

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "oscint/experiments.hpp"
#include "oscint/io.hpp"
#include "oscint/poly.hpp"

namespace {

using nlohmann::json;
using namespace oscint;

// ---------------------------------------------------------------------------
// check

SupportSet parse_support_arg(const std::string& text) {
  std::size_t i = text.find_first_not_of(" \t");
  if (i != std::string::npos && text[i] == '[')
    return support_from_json(json::parse(text));
  return support_from_inline(text);
}

std::string set_to_text(const std::set<int>& s) {
  std::string out = "{";
  for (int v : s) {
    if (out.size() > 1) out += ", ";
    out += std::to_string(v);
  }
  return out + "}";
}

std::string support_to_text(const SupportSet& s) {
  std::string out = "{";
  for (const MultiIndex& a : s) {
    if (out.size() > 1) out += ", ";
    out += "(" + std::to_string(a.j) + "," + std::to_string(a.k) + ")";
  }
  return out + "}";
}

int cmd_check(const std::string& text) {
  SupportSet s;
  try {
    s = parse_support_arg(text);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  auto verdict = [](bool v) { return v ? "pass" : "fail"; };
  std::cout << "support " << support_to_text(s) << "\n\n";
  std::cout << "  row slice j=0     " << set_to_text(rows(s, 0)) << "\n";
  std::cout << "  row slice j=1     " << set_to_text(rows(s, 1)) << "\n";
  std::cout << "  column slice k=0  " << set_to_text(cols(s, 0)) << "\n";
  std::cout << "  column slice k=1  " << set_to_text(cols(s, 1)) << "\n\n";
  std::cout << "  condition (a)  no pure linear term        "
            << verdict(check_condition_a(s)) << "\n";
  std::cout << "  condition (b)  0/1 slices not both used   "
            << verdict(check_condition_b(s)) << "\n";
  std::cout << "  uniform route  (a) and (b)                "
            << verdict(check_h1_uniform(s)) << "\n";
  std::cout << "  even products  every j*k even             "
            << verdict(check_ricci_stein(s)) << "\n";
  std::cout << "  combined       all of the above           "
            << verdict(check_corollary(s)) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// run config

struct RunConfig {
  std::string experiment;
  json params = json::object();  // validated per experiment at dispatch
  std::uint64_t seed = 1;
  QuadSpec quad;
  std::string output_dir = "out";
  int workers = 0;  // 0: leave OSCINT_WORKERS / hardware default in charge
  std::map<std::string, double> criteria;

  bool operator==(const RunConfig& o) const {
    return experiment == o.experiment && params == o.params &&
           seed == o.seed && quad.rel_tol == o.quad.rel_tol &&
           quad.abs_tol == o.quad.abs_tol &&
           quad.max_panels == o.quad.max_panels &&
           quad.nodes_per_panel == o.quad.nodes_per_panel &&
           output_dir == o.output_dir && workers == o.workers &&
           criteria == o.criteria;
  }
};

[[noreturn]] void bad_config(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

void expect_keys(const json& j, const std::string& where,
                 const std::set<std::string>& allowed) {
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) bad_config("unknown key \"" + k + "\" in " + where);
}

double num_at(const json& j, const std::string& where) {
  if (!j.is_number()) bad_config(where + " must be a number");
  return j.get<double>();
}

long int_at(const json& j, const std::string& where) {
  if (!j.is_number_integer()) bad_config(where + " must be an integer");
  return j.get<long>();
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) bad_config("top level must be a JSON object");
  expect_keys(j, "config", {"experiment", "params", "seed", "quad",
                            "output_dir", "workers", "criteria"});
  RunConfig c;
  if (!j.contains("experiment")) bad_config("missing \"experiment\"");
  if (!j["experiment"].is_string()) bad_config("\"experiment\" must be a string");
  c.experiment = j["experiment"].get<std::string>();
  if (j.contains("params")) {
    if (!j["params"].is_object()) bad_config("\"params\" must be an object");
    c.params = j["params"];
  }
  if (j.contains("seed")) {
    long s = int_at(j["seed"], "\"seed\"");
    if (s < 0) bad_config("\"seed\" must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (j.contains("quad")) {
    const json& q = j["quad"];
    if (!q.is_object()) bad_config("\"quad\" must be an object");
    expect_keys(q, "quad", {"rel_tol", "abs_tol", "max_panels",
                            "nodes_per_panel"});
    if (q.contains("rel_tol")) c.quad.rel_tol = num_at(q["rel_tol"], "quad.rel_tol");
    if (q.contains("abs_tol")) c.quad.abs_tol = num_at(q["abs_tol"], "quad.abs_tol");
    if (q.contains("max_panels"))
      c.quad.max_panels = int_at(q["max_panels"], "quad.max_panels");
    if (q.contains("nodes_per_panel"))
      c.quad.nodes_per_panel =
          static_cast<int>(int_at(q["nodes_per_panel"], "quad.nodes_per_panel"));
    if (c.quad.rel_tol <= 0 || c.quad.abs_tol <= 0)
      bad_config("quad tolerances must be positive");
    if (c.quad.max_panels < 1 || c.quad.nodes_per_panel < 2)
      bad_config("quad panel settings out of range");
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) bad_config("\"output_dir\" must be a string");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("workers")) {
    long w = int_at(j["workers"], "\"workers\"");
    if (w < 0) bad_config("\"workers\" must be non-negative");
    c.workers = static_cast<int>(w);
  }
  if (j.contains("criteria")) {
    const json& cr = j["criteria"];
    if (!cr.is_object()) bad_config("\"criteria\" must be an object");
    for (const auto& [k, v] : cr.items()) {
      bool ok = k.size() > 4 && (k.ends_with("_min") || k.ends_with("_max"));
      if (!ok)
        bad_config("criterion \"" + k + "\" must end in _min or _max");
      c.criteria[k] = num_at(v, "criteria." + k);
    }
  }
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["params"] = c.params;
  j["seed"] = c.seed;
  j["quad"] = {{"rel_tol", c.quad.rel_tol},
               {"abs_tol", c.quad.abs_tol},
               {"max_panels", c.quad.max_panels},
               {"nodes_per_panel", c.quad.nodes_per_panel}};
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["criteria"] = json::object();
  for (const auto& [k, v] : c.criteria) j["criteria"][k] = v;
  return j;
}

// Strict typed access to the params object; every key must be consumed.
class ParamReader {
 public:
  ParamReader(const json& j, std::string experiment)
      : j_(j), exp_(std::move(experiment)) {}

  bool has(const std::string& key) const { return j_.contains(key); }

  long get_int(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    return int_at(take(key), where(key));
  }
  long require_int(const std::string& key) {
    return int_at(require(key), where(key));
  }
  double get_real(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return num_at(take(key), where(key));
  }
  std::string get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = take(key);
    if (!v.is_string()) bad_config(where(key) + " must be a string");
    return v.get<std::string>();
  }
  std::vector<int> require_int_list(const std::string& key) {
    const json& v = require(key);
    if (!v.is_array() || v.empty())
      bad_config(where(key) + " must be a non-empty integer list");
    std::vector<int> out;
    for (const json& e : v)
      out.push_back(static_cast<int>(int_at(e, where(key) + " entry")));
    return out;
  }
  std::pair<double, double> require_interval(const std::string& key) {
    const json& v = require(key);
    if (!v.is_array() || v.size() != 2)
      bad_config(where(key) + " must be an interval [lo, hi]");
    double lo = num_at(v[0], where(key) + "[0]");
    double hi = num_at(v[1], where(key) + "[1]");
    if (!(lo <= hi)) bad_config(where(key) + " must satisfy lo <= hi");
    return {lo, hi};
  }
  MultiIndex require_index(const std::string& key) {
    const json& v = require(key);
    if (!v.is_array() || v.size() != 2)
      bad_config(where(key) + " must be a pair [j, k]");
    return {static_cast<int>(int_at(v[0], where(key) + "[0]")),
            static_cast<int>(int_at(v[1], where(key) + "[1]"))};
  }
  std::vector<ScalePair> require_pair_list(const std::string& key) {
    const json& v = require(key);
    if (!v.is_array() || v.empty())
      bad_config(where(key) + " must be a non-empty list of [p, q] pairs");
    std::vector<ScalePair> out;
    for (const json& e : v) {
      if (!e.is_array() || e.size() != 2)
        bad_config(where(key) + " entries must be [p, q] pairs");
      out.push_back({static_cast<int>(int_at(e[0], where(key))),
                     static_cast<int>(int_at(e[1], where(key)))});
    }
    return out;
  }
  // Support set, either inline "j,k;j,k" or a JSON [[j, k], ...] array.
  SupportSet require_support(const std::string& key) {
    const json& v = require(key);
    used_.insert(key);
    if (v.is_string()) return support_from_inline(v.get<std::string>());
    if (v.is_array()) return support_from_json(v);
    bad_config(where(key) + " must be an inline string or [[j,k],...] array");
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k))
        bad_config("unknown key \"" + k + "\" in params for " + exp_);
  }

 private:
  std::string where(const std::string& key) const {
    return "params." + key + " (" + exp_ + ")";
  }
  const json& take(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }
  const json& require(const std::string& key) {
    if (!has(key)) bad_config("missing params." + key + " for " + exp_);
    return take(key);
  }

  const json& j_;
  std::string exp_;
  std::set<std::string> used_;
};

// The predicate report as a runnable experiment, so a config can pin the
// verdicts in CSV form next to the numerical runs.
ExperimentResult run_predicate_check(const SupportSet& s) {
  ExperimentResult res;
  res.name = "check";
  res.param_name = "index";
  res.params["support"] = support_to_text(s);
  auto put = [&res](const std::string& name, bool v) {
    res.metrics[name] = v ? 1.0 : 0.0;
    res.rows.push_back({name, 0.0, v ? 1.0 : 0.0, 0.0});
  };
  put("condition_a", check_condition_a(s));
  put("condition_b", check_condition_b(s));
  put("h1_uniform", check_h1_uniform(s));
  put("ricci_stein", check_ricci_stein(s));
  put("corollary", check_corollary(s));
  return res;
}

ExperimentResult dispatch(const RunConfig& cfg) {
  ParamReader p(cfg.params, cfg.experiment);
  const QuadSpec& spec = cfg.quad;
  ExperimentResult res;
  if (cfg.experiment == "no-decay") {
    std::vector<int> ms = p.require_int_list("m_list");
    int ge = static_cast<int>(p.get_int("gamma_exponent", 2));
    p.finish();
    res = run_no_decay(ms, spec, ge);
  } else if (cfg.experiment == "necessity") {
    int k0 = static_cast<int>(p.require_int("k0"));
    int k1 = static_cast<int>(p.require_int("k1"));
    std::vector<int> es = p.require_int_list("eps_exponents");
    std::string mode = p.get_string("mode", "reduced");
    double eta = p.get_real("eta", 1.0);
    p.finish();
    if (mode != "reduced" && mode != "full-check")
      bad_config("params.mode must be \"reduced\" or \"full-check\"");
    res = run_necessity(k0, k1, es,
                        mode == "reduced" ? NecessityMode::reduced
                                          : NecessityMode::full_check,
                        spec, eta);
  } else if (cfg.experiment == "ftb") {
    p.finish();
    res = run_ftb_checks(spec);
  } else if (cfg.experiment == "sufficiency") {
    SupportSet delta = p.require_support("delta");
    double gamma = p.get_real("gamma", 2.0);
    int trials = static_cast<int>(p.require_int("trials"));
    auto [lo, hi] = p.require_interval("coeff_log2_range");
    int q_max = static_cast<int>(p.require_int("q_max"));
    p.finish();
    res = run_sufficiency_sweep(delta, gamma, trials, lo, hi, q_max, cfg.seed,
                                spec);
  } else if (cfg.experiment == "contrast") {
    double gamma = p.get_real("gamma", 2.0);
    int trials = static_cast<int>(p.get_int("trials", 1));
    std::vector<int> es = p.require_int_list("eps_exponents");
    p.finish();
    res = run_contrast_sweep(gamma, trials, es, cfg.seed, spec);
  } else if (cfg.experiment == "l2-decay") {
    SupportSet delta = p.require_support("delta");
    MultiIndex alpha = p.require_index("alpha_star");
    std::vector<ScalePair> grid = p.require_pair_list("pq_grid");
    std::vector<int> ce = p.require_int_list("coeff_exponents");
    int gn = static_cast<int>(p.get_int("grid_n", 48));
    p.finish();
    res = run_l2_decay(delta, alpha, grid, ce, gn, spec);
  } else if (cfg.experiment == "lemmas") {
    p.finish();
    res = run_lemma_suite(spec);
  } else if (cfg.experiment == "check") {
    SupportSet s = p.require_support("support");
    p.finish();
    res = run_predicate_check(s);
  } else {
    bad_config("unknown experiment \"" + cfg.experiment +
               "\" (expected one of no-decay, necessity, ftb, sufficiency, "
               "contrast, l2-decay, lemmas, check)");
  }
  res.seed = cfg.seed;
  return res;
}

struct CriterionOutcome {
  std::string text;
  bool ok = true;
};

std::vector<CriterionOutcome> evaluate_criteria(
    const std::map<std::string, double>& criteria,
    const std::map<std::string, double>& metrics) {
  std::vector<CriterionOutcome> out;
  for (const auto& [key, bound] : criteria) {
    bool is_min = key.ends_with("_min");
    std::string metric = key.substr(0, key.size() - 4);
    auto it = metrics.find(metric);
    if (it == metrics.end())
      throw std::invalid_argument("criterion \"" + key +
                                  "\" names no metric of this experiment");
    double v = it->second;
    bool ok = std::isfinite(v) && (is_min ? v >= bound : v <= bound);
    std::ostringstream line;
    line << "  " << key << ": " << format_g17(v)
         << (is_min ? " >= " : " <= ") << format_g17(bound) << "  "
         << (ok ? "pass" : "FAIL");
    out.push_back({line.str(), ok});
  }
  return out;
}

int cmd_run(const std::string& config_path,
            const std::optional<std::uint64_t>& seed_override,
            const std::optional<std::string>& dir_override,
            const std::optional<int>& workers_override, bool print_config) {
  json raw;
  {
    std::ifstream f(config_path);
    if (!f) {
      std::cerr << "error: cannot open " << config_path << "\n";
      return 1;
    }
    try {
      raw = json::parse(f);
    } catch (const json::parse_error& e) {
      std::cerr << "error: " << config_path << ": " << e.what() << "\n";
      return 1;
    }
  }
  RunConfig cfg;
  try {
    cfg = config_from_json(raw);
    if (seed_override) cfg.seed = *seed_override;
    if (dir_override) cfg.output_dir = *dir_override;
    if (workers_override) cfg.workers = *workers_override;
    if (print_config) {
      std::cout << config_to_json(cfg).dump(2) << "\n";
      return 0;
    }
    if (cfg.workers > 0)
      setenv("OSCINT_WORKERS", std::to_string(cfg.workers).c_str(), 1);

    ExperimentResult res = dispatch(cfg);

    std::string stem = res.name + "-" + std::to_string(res.seed);
    std::string csv = write_experiment(res, cfg.quad, cfg.output_dir, stem);

    std::cout << "experiment " << res.name << " (seed " << res.seed << ")\n";
    std::cout << "converged: " << (res.converged ? "yes" : "NO") << "\n";
    std::cout << "wall time: " << format_g17(res.wall_time) << " s\n";
    for (const auto& [k, v] : res.metrics)
      std::cout << "  " << k << " = " << format_g17(v) << "\n";
    std::cout << "wrote " << csv << "\n";

    bool gate_ok = res.converged;
    if (!res.converged)
      std::cout << "FAIL: quadrature did not converge everywhere\n";
    if (!cfg.criteria.empty()) {
      std::cout << "criteria:\n";
      for (const CriterionOutcome& c :
           evaluate_criteria(cfg.criteria, res.metrics)) {
        std::cout << c.text << "\n";
        gate_ok = gate_ok && c.ok;
      }
    }
    return gate_ok ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// plotdata

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

int cmd_plotdata(const std::string& csv_path, const std::string& x_col,
                 const std::string& y_col, const std::string& transform) {
  std::ifstream f(csv_path);
  if (!f) {
    std::cerr << "error: cannot open " << csv_path << "\n";
    return 1;
  }
  std::string header;
  if (!std::getline(f, header)) {
    std::cerr << "error: " << csv_path << " is empty\n";
    return 1;
  }
  std::vector<std::string> names = split_csv_line(header);
  auto col_of = [&names](const std::string& want) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == want) return static_cast<long>(i);
    return -1l;
  };
  long xi = col_of(x_col), yi = col_of(y_col);
  for (const auto& [idx, name] : {std::pair{xi, x_col}, {yi, y_col}}) {
    if (idx < 0) {
      std::cerr << "error: no column \"" << name << "\" in " << csv_path
                << " (have: " << header << ")\n";
      return 1;
    }
  }

  bool lx2 = transform == "log2x", lxe = transform == "lnx";
  bool ly2 = transform == "log2y";
  std::cout << "# " << csv_path << "\n";
  std::cout << "# x: " << (lx2 ? "log2 " : lxe ? "ln " : "") << x_col << "\n";
  std::cout << "# y: " << (ly2 ? "log2 " : "") << y_col << "\n";

  std::string line;
  long row = 0;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    auto cell_num = [&](long idx, const std::string& name, double& out) {
      if (idx >= static_cast<long>(cells.size())) {
        std::cerr << "error: data row " << row << " has no column \"" << name
                  << "\"\n";
        return false;
      }
      const std::string& c = cells[idx];
      char* end = nullptr;
      out = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size()) {
        std::cerr << "error: non-numeric value \"" << c << "\" in column \""
                  << name << "\" at data row " << row << "\n";
        return false;
      }
      return true;
    };
    double x, y;
    if (!cell_num(xi, x_col, x) || !cell_num(yi, y_col, y)) return 1;
    if ((lx2 || lxe) && x <= 0) {
      std::cerr << "error: x <= 0 at data row " << row
                << ", cannot apply " << transform << "\n";
      return 1;
    }
    if (ly2 && y <= 0) {
      std::cerr << "error: y <= 0 at data row " << row
                << ", cannot apply " << transform << "\n";
      return 1;
    }
    if (lx2) x = std::log2(x);
    if (lxe) x = std::log(x);
    if (ly2) y = std::log2(y);
    std::cout << format_g17(x) << " " << format_g17(y) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oscillatory-kernel laboratory: support-set predicates and "
               "numerical experiments"};
  app.require_subcommand(1);

  auto* check = app.add_subcommand(
      "check", "evaluate the support-set predicates for one exponent set");
  std::string support_text;
  check
      ->add_option("support", support_text,
                   "inline \"j,k;j,k\" or JSON \"[[j,k],...]\"")
      ->required();

  auto* run = app.add_subcommand(
      "run", "run an experiment from a JSON config (exit 0 pass, 2 criteria "
             "failure, 1 error)");
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> dir_override;
  std::optional<int> workers_override;
  bool print_config = false;
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--output-dir", dir_override, "override the output directory");
  run->add_option("--workers", workers_override, "override the worker count");
  run->add_flag("--print-config", print_config,
                "print the normalized config and exit without running");

  auto* plot = app.add_subcommand(
      "plotdata", "extract two columns of a result CSV as plain text");
  std::string csv_path, x_col, y_col, transform = "none";
  plot->add_option("csv", csv_path, "result CSV file")->required();
  plot->add_option("--x", x_col, "x column name")->required();
  plot->add_option("--y", y_col, "y column name")->required();
  plot->add_option("--transform", transform, "none, log2x, lnx or log2y")
      ->check(CLI::IsMember({"none", "log2x", "lnx", "log2y"}));

  CLI11_PARSE(app, argc, argv);

  if (check->parsed()) return cmd_check(support_text);
  if (run->parsed())
    return cmd_run(config_path, seed_override, dir_override, workers_override,
                   print_config);
  return cmd_plotdata(csv_path, x_col, y_col, transform);
}
