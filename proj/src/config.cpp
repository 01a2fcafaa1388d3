#include "seqvamp/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "seqvamp/numeric.hpp"

namespace seqvamp {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Simulate: return "simulate";
    case Mode::Theory: return "theory";
    case Mode::Compare: return "compare";
    case Mode::FixedPoint: return "fixed-point";
    case Mode::PhaseScan: return "phase-scan";
  }
  return "unknown";
}

Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::Simulate, Mode::Theory, Mode::Compare, Mode::FixedPoint, Mode::PhaseScan})
    if (s == to_string(m)) return m;
  throw Error(ErrorKind::Validation, "unknown mode '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  auto b = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  auto e = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return b < e ? std::string(b, e) : std::string();
}

double to_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw std::invalid_argument("not a number: " + t);
  return v;
}

long long to_int(const std::string& s) {
  const std::string t = trim(s);
  long long v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw std::invalid_argument("not an integer: " + t);
  return v;
}

bool to_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("not a boolean: " + t);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& x : split_commas(s)) out.push_back(to_double(x));
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& x : split_commas(s)) {
    const long long v = to_int(x);
    if (v < 0) throw std::invalid_argument("negative seed");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  if (out.empty()) throw std::invalid_argument("empty seed list");
  return out;
}

double ExperimentConfig::q() const { return ensemble.q(); }

namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"mode", [](auto& c, auto& v) { c.mode = parse_mode(trim(v)); }},
      {"ensemble.kind", [](auto& c, auto& v) { c.ensemble.kind = parse_ensemble_kind(trim(v)); }},
      {"ensemble.N", [](auto& c, auto& v) { c.ensemble.N = static_cast<int>(to_int(v)); }},
      {"ensemble.P", [](auto& c, auto& v) { c.ensemble.P = static_cast<int>(to_int(v)); }},
      {"ensemble.eigenvalues", [](auto& c, auto& v) { c.ensemble.eigenvalues = parse_double_list(v); }},
      {"ensemble.epsilon", [](auto& c, auto& v) { c.ensemble.epsilon = to_double(v); }},
      {"ensemble.identity_basis", [](auto& c, auto& v) { c.ensemble.identity_basis = to_bool(v); }},
      {"ensemble.memory_budget_bytes", [](auto& c, auto& v) { c.ensemble.memory_budget_bytes = to_double(v); }},
      {"teacher.beta", [](auto& c, auto& v) { c.teacher.beta = to_double(v); }},
      {"teacher.sigma", [](auto& c, auto& v) { c.teacher.sigma = to_double(v); }},
      {"teacher.noise_free", [](auto& c, auto& v) { c.teacher.noise_free = to_bool(v); }},
      {"student.beta", [](auto& c, auto& v) { c.student.beta = to_double(v); }},
      {"student.sigma", [](auto& c, auto& v) { c.student.sigma = to_double(v); }},
      {"student.noise_free", [](auto& c, auto& v) { c.student.noise_free = to_bool(v); }},
      {"run.eta", [](auto& c, auto& v) { c.eta = to_double(v); }},
      {"run.T", [](auto& c, auto& v) { c.T = static_cast<int>(to_int(v)); }},
      {"run.seeds", [](auto& c, auto& v) { c.seeds = parse_seed_list(v); }},
      {"run.nu0", [](auto& c, auto& v) { c.nu0 = to_double(v); }},
      {"run.converge_tol", [](auto& c, auto& v) { c.converge_tol = to_double(v); }},
      {"run.overflow_guard", [](auto& c, auto& v) { c.overflow_guard = to_double(v); }},
      {"run.growth_guard", [](auto& c, auto& v) { c.growth_guard = to_double(v); }},
      {"run.growth_window", [](auto& c, auto& v) { c.growth_window = static_cast<int>(to_int(v)); }},
      {"run.force_all_ones_mask", [](auto& c, auto& v) { c.force_all_ones_mask = to_bool(v); }},
      {"theory.order", [](auto& c, auto& v) { c.quad_order = static_cast<int>(to_int(v)); }},
      {"theory.panel_order", [](auto& c, auto& v) { c.panel_order = static_cast<int>(to_int(v)); }},
      {"theory.two_time", [](auto& c, auto& v) { c.two_time = to_bool(v); }},
      {"solver.damping", [](auto& c, auto& v) { c.solver.damping = to_double(v); }},
      {"solver.tol", [](auto& c, auto& v) { c.solver.tol = to_double(v); }},
      {"solver.max_iter", [](auto& c, auto& v) { c.solver.max_iter = static_cast<int>(to_int(v)); }},
      {"solver.multistart", [](auto& c, auto& v) { c.solver.multistart = to_bool(v); }},
      {"scan.beta0", [](auto& c, auto& v) { c.scan_beta0 = parse_double_list(v); }},
      {"scan.sigma0", [](auto& c, auto& v) { c.scan_sigma0 = parse_double_list(v); }},
      {"scan.q", [](auto& c, auto& v) { c.scan_q = parse_double_list(v); }},
      {"scan.eta", [](auto& c, auto& v) { c.scan_eta = parse_double_list(v); }},
      {"output.dir", [](auto& c, auto& v) { c.out_dir = trim(v); }},
      {"output.dump_vectors", [](auto& c, auto& v) { c.dump_vectors = to_bool(v); }},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  cfg.source = source;
  std::istringstream in(text);
  std::string raw, section;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::Validation, source + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    auto it = setters().find(full);
    if (it == setters().end()) fail("unknown field '" + full + "'");
    if (cfg.lines.count(full)) fail("field '" + full + "' set twice");
    try {
      it->second(cfg, value);
    } catch (const Error& e) {
      fail("field '" + full + "': " + e.what());
    } catch (const std::exception& e) {
      fail("field '" + full + "': " + e.what());
    }
    cfg.lines[full] = lineno;
  }
  if (!cfg.lines.count("teacher.beta") && !cfg.lines.count("teacher.sigma") && !cfg.lines.count("teacher.noise_free"))
    cfg.teacher = LikelihoodParams::make_noise_free();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Validation, path + ": cannot open config file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

void ExperimentConfig::validate() const {
  auto where = [&](const std::string& field) {
    auto it = lines.find(field);
    std::string loc = source + ":" + (it == lines.end() ? std::string("-") : std::to_string(it->second));
    return loc + ": field '" + field + "': ";
  };
  auto check = [&](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) throw Error(ErrorKind::Validation, where(field) + msg);
  };
  auto wrap = [&](const std::string& field, const std::function<void()>& f) {
    try {
      f();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Validation) throw;
      throw Error(ErrorKind::Validation, where(field) + e.what());
    }
  };
  wrap("teacher", [&] { teacher.validate(); });
  wrap("student", [&] { student.validate(); });
  check(eta > 0.0 && eta <= 1.0, "run.eta", "must lie in (0, 1]");
  check(T >= 1, "run.T", "must be >= 1");
  check(!seeds.empty(), "run.seeds", "must not be empty");
  check(nu0 > 0.0 && std::isfinite(nu0), "run.nu0", "must be positive");
  check(quad_order >= 4 && quad_order <= 400, "theory.order", "must lie in [4, 400]");
  check(panel_order >= 4 && panel_order <= 200, "theory.panel_order", "must lie in [4, 200]");
  check(solver.damping > 0.0 && solver.damping <= 1.0, "solver.damping", "must lie in (0, 1]");
  check(solver.tol > 0.0, "solver.tol", "must be positive");
  check(solver.max_iter >= 1, "solver.max_iter", "must be >= 1");
  check(growth_window >= 1, "run.growth_window", "must be >= 1");
  check(overflow_guard > 0.0, "run.overflow_guard", "must be positive");
  check(converge_tol > 0.0, "run.converge_tol", "must be positive");
  check(!out_dir.empty(), "output.dir", "must not be empty");
  if (mode == Mode::PhaseScan) {
    check(!scan_beta0.empty(), "scan.beta0", "phase-scan needs at least one value");
    check(!scan_sigma0.empty(), "scan.sigma0", "phase-scan needs at least one value");
    check(ensemble.kind != EnsembleKind::ExplicitEigenvalues, "ensemble.kind",
          "phase-scan needs a closed-form ensemble");
    for (double b : scan_beta0) check(b >= 0.0 && b <= 0.5, "scan.beta0", "values must lie in [0, 1/2]");
    for (double s : scan_sigma0) check(s >= 0.0 && std::isfinite(s), "scan.sigma0", "values must be >= 0");
    for (double q : scan_q) check(q > 0.0 && std::isfinite(q), "scan.q", "values must be positive");
    for (double e : scan_eta) check(e > 0.0 && e <= 1.0, "scan.eta", "values must lie in (0, 1]");
    if (scan_q.empty()) wrap("ensemble", [&] { ensemble.validate(); });
  } else {
    wrap("ensemble", [&] { ensemble.validate(); });
  }
}

}  // namespace seqvamp
