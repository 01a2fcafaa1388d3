#include "seqvamp/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "seqvamp/numeric.hpp"
#include "seqvamp/stationary.hpp"

namespace fs = std::filesystem;

namespace seqvamp {

int thread_cap() {
  if (const char* env = std::getenv("SEQMP_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RunConfig make_run_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunConfig rc;
  rc.ensemble = cfg.ensemble;
  rc.ensemble.seed = seed;
  rc.teacher = cfg.teacher;
  rc.student = cfg.student;
  rc.eta = cfg.eta;
  rc.T = cfg.T;
  rc.seed = seed;
  rc.nu0 = cfg.nu0;
  rc.converge_tol = cfg.converge_tol;
  rc.overflow_guard = cfg.overflow_guard;
  rc.growth_guard = cfg.growth_guard;
  rc.growth_window = cfg.growth_window;
  rc.force_all_ones_mask = cfg.force_all_ones_mask;
  rc.record.mask = false;
  return rc;
}

QuadratureRule make_quadrature(const ExperimentConfig& cfg) { return QuadratureRule::make(cfg.quad_order, cfg.panel_order); }

std::vector<Trajectory> simulate_seeds(const ExperimentConfig& cfg) {
  const std::size_t n = cfg.seeds.size();
  std::vector<Trajectory> out(n);
  const std::size_t width = static_cast<std::size_t>(thread_cap());
  for (std::size_t base = 0; base < n; base += width) {
    std::vector<std::future<void>> jobs;
    for (std::size_t k = base; k < std::min(n, base + width); ++k)
      jobs.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                [&, k] { out[k] = run_rsvamp(make_run_config(cfg, cfg.seeds[k])); }));
    for (auto& j : jobs) j.get();
  }
  return out;
}

OrderParameterTable theory_table(const ExperimentConfig& cfg) {
  SpectralModel model = make_spectral_model(cfg.ensemble);
  TheoryOptions opt;
  opt.T = cfg.T;
  opt.eta = cfg.eta;
  opt.nu0 = cfg.nu0;
  opt.two_time = cfg.two_time;
  opt.check_div_free = true;
  return run_theory(opt, model, cfg.teacher, cfg.student, make_quadrature(cfg));
}

namespace {

Eigen::MatrixXd gram(const std::vector<Eigen::VectorXd>& vs, int T, int n) {
  Eigen::MatrixXd g(T, T);
  for (int a = 0; a < T; ++a)
    for (int b = 0; b <= a; ++b) g(a, b) = g(b, a) = vs[a].dot(vs[b]) / n;
  return g;
}

void mean_se(const std::vector<double>& xs, double& mean, double& se) {
  const double n = static_cast<double>(xs.size());
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  se = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : std::numeric_limits<double>::quiet_NaN();
}

double zscore(double mean, double se, double theory) {
  const double d = mean - theory;
  if (se > 0.0) return d / se;
  if (d == 0.0) return 0.0;
  return d > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

std::string fmt(double x) { return format_double(x); }

void write_matrix(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ofstream f(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) f << (j ? "," : "") << fmt(m(i, j));
    f << "\n";
  }
}

void write_trajectory(const fs::path& dir, const Trajectory& tr, bool dump) {
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "trajectory.csv");
    f << "t,chi,lambda,tau,nu,update_fraction,error,phi_sq\n";
    for (int t = 1; t <= tr.T(); ++t) {
      const StepRecord& r = tr.steps[t - 1];
      f << t << "," << fmt(r.chi) << "," << fmt(r.lambda) << "," << fmt(r.tau) << "," << fmt(r.nu) << ","
        << fmt(r.update_fraction) << "," << fmt(r.error) << "," << fmt(r.phi_sq) << "\n";
    }
  }
  if (!tr.gamma.empty()) {
    std::ofstream f(dir / "distance.csv");
    f << "t,log_dist\n";
    const Eigen::VectorXd& last = tr.gamma.back();
    for (int t = 1; t < tr.T(); ++t)
      f << t << "," << fmt(std::log((tr.gamma[t - 1] - last).squaredNorm() / tr.N)) << "\n";
  }
  if (dump) {
    write_vectors((dir / "gamma.bin").string(), tr.gamma);
    write_vectors((dir / "phi.bin").string(), tr.phi);
  }
}

void write_theory(const fs::path& dir, const OrderParameterTable& tab) {
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "scalars.csv");
    f << "t,tau,lambda,nu,chi,zeta,b_hat,theta_gamma_tilde,error,div_free\n";
    for (int i = 0; i < tab.T; ++i)
      f << i + 1 << "," << fmt(tab.tau(i)) << "," << fmt(tab.lambda(i)) << "," << fmt(tab.nu(i)) << ","
        << fmt(tab.chi(i)) << "," << fmt(tab.zeta(i)) << "," << fmt(tab.b_hat(i)) << ","
        << fmt(tab.theta_gamma_tilde(i)) << "," << fmt(tab.error(i)) << "," << fmt(tab.div_free(i)) << "\n";
  }
  write_matrix(dir / "c_phi.csv", tab.c_phi);
  write_matrix(dir / "c_gamma.csv", tab.c_gamma);
  write_matrix(dir / "c.csv", tab.c);
  write_matrix(dir / "big_q.csv", tab.big_q);
  write_matrix(dir / "big_d.csv", tab.big_d);
  write_matrix(dir / "gt_gt.csv", tab.gt_gt);
}

void write_summary(const fs::path& path, const std::vector<Trajectory>& trs) {
  int T = std::numeric_limits<int>::max();
  for (const auto& tr : trs) T = std::min(T, tr.T());
  std::ofstream f(path);
  f << "t,seeds,chi_mean,chi_se,tau_mean,tau_se,error_mean,error_se,phi_sq_mean,phi_sq_se\n";
  for (int t = 1; t <= T; ++t) {
    f << t << "," << trs.size();
    for (auto get : {+[](const StepRecord& r) { return r.chi; }, +[](const StepRecord& r) { return r.tau; },
                     +[](const StepRecord& r) { return r.error; }, +[](const StepRecord& r) { return r.phi_sq; }}) {
      std::vector<double> xs;
      for (const auto& tr : trs) xs.push_back(get(tr.steps[t - 1]));
      double m, s;
      mean_se(xs, m, s);
      f << "," << fmt(m) << "," << fmt(s);
    }
    f << "\n";
  }
}

nlohmann::json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

}  // namespace

SeedObservables observe(const Trajectory& tr) {
  SeedObservables o;
  o.T = tr.T();
  o.chi.resize(o.T);
  o.tau.resize(o.T);
  o.error.resize(o.T);
  for (int t = 0; t < o.T; ++t) {
    o.chi(t) = tr.steps[t].chi;
    o.tau(t) = tr.steps[t].tau;
    o.error(t) = tr.steps[t].error;
  }
  if (static_cast<int>(tr.phi.size()) == o.T) o.c_phi = gram(tr.phi, o.T, tr.N);
  if (static_cast<int>(tr.gamma.size()) == o.T) o.c_gamma = gram(tr.gamma, o.T, tr.N);
  return o;
}

double CompareReport::max_abs_z(const std::string& quantity) const {
  double m = 0.0;
  for (const auto& e : entries)
    if (quantity.empty() || e.quantity == quantity) m = std::max(m, std::abs(e.z));
  return m;
}

CompareReport compare_report(const OrderParameterTable& theory, const std::vector<SeedObservables>& sims) {
  CompareReport rep;
  rep.seeds = static_cast<int>(sims.size());
  int T = theory.T;
  for (const auto& s : sims) T = std::min(T, s.T);
  rep.T = T;
  auto add = [&](const std::string& q, int i, int j, double th, const std::vector<double>& xs) {
    CompareEntry e;
    e.quantity = q;
    e.i = i;
    e.j = j;
    e.theory = th;
    mean_se(xs, e.mean, e.se);
    e.z = zscore(e.mean, e.se, th);
    rep.entries.push_back(e);
  };
  for (int t = 0; t < T; ++t) {
    std::vector<double> chi, tau, err;
    for (const auto& s : sims) {
      chi.push_back(s.chi(t));
      tau.push_back(s.tau(t));
      err.push_back(s.error(t));
    }
    add("chi", t + 1, 0, theory.chi(t), chi);
    add("tau", t + 1, 0, theory.tau(t), tau);
    if (std::isfinite(theory.error(t))) add("error", t + 1, 0, theory.error(t), err);
  }
  for (const char* name : {"c_phi", "c_gamma"}) {
    const bool phi = std::strcmp(name, "c_phi") == 0;
    const Eigen::MatrixXd& th = phi ? theory.c_phi : theory.c_gamma;
    for (int i = 0; i < T; ++i)
      for (int j = i; j < T; ++j) {
        if (!std::isfinite(th(i, j))) continue;
        std::vector<double> xs;
        bool ok = true;
        for (const auto& s : sims) {
          const Eigen::MatrixXd& m = phi ? s.c_phi : s.c_gamma;
          if (m.rows() <= j) {
            ok = false;
            break;
          }
          xs.push_back(m(i, j));
        }
        if (ok) add(name, i + 1, j + 1, th(i, j), xs);
      }
  }
  return rep;
}

void write_vectors(const std::string& path, const std::vector<Eigen::VectorXd>& vs) {
  static_assert(std::endian::native == std::endian::little, "vector dumps assume a little-endian host");
  std::ofstream f(path, std::ios::binary);
  const char magic[4] = {'S', 'Q', 'V', 'B'};
  const std::uint32_t version = 1;
  const std::uint64_t n = vs.empty() ? 0 : static_cast<std::uint64_t>(vs.front().size());
  const std::uint64_t t = vs.size();
  f.write(magic, 4);
  f.write(reinterpret_cast<const char*>(&version), sizeof version);
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(reinterpret_cast<const char*>(&t), sizeof t);
  for (const auto& v : vs) f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(8 * n));
  if (!f) throw Error(ErrorKind::Validation, "cannot write " + path);
}

std::vector<Eigen::VectorXd> read_vectors(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t n = 0, t = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&version), sizeof version);
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  f.read(reinterpret_cast<char*>(&t), sizeof t);
  if (!f || std::memcmp(magic, "SQVB", 4) != 0 || version != 1)
    throw Error(ErrorKind::Validation, path + ": not a vector dump");
  std::vector<Eigen::VectorXd> out(t, Eigen::VectorXd(n));
  for (auto& v : out) f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(8 * n));
  if (!f) throw Error(ErrorKind::Validation, path + ": truncated vector dump");
  return out;
}

std::string error_record(const std::string& status, const std::string& kind, int exit_code,
                         const std::string& message, int step) {
  nlohmann::json j;
  j["status"] = status;
  j["kind"] = kind;
  j["exit_code"] = exit_code;
  j["message"] = message;
  if (step >= 0) j["step"] = step;
  return j.dump();
}

namespace {

int do_simulate(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log, std::ostream& err) {
  std::vector<Trajectory> trs = simulate_seeds(cfg);
  for (std::size_t k = 0; k < trs.size(); ++k) {
    const fs::path dir = out / ("seed_" + std::to_string(cfg.seeds[k]));
    write_trajectory(dir, trs[k], cfg.dump_vectors);
    SeedObservables o = observe(trs[k]);
    if (o.c_phi.size()) write_matrix(dir / "c_phi.csv", o.c_phi);
    if (o.c_gamma.size()) write_matrix(dir / "c_gamma.csv", o.c_gamma);
  }
  write_summary(out / "summary.csv", trs);
  log << "simulate: " << trs.size() << " seeds written to " << out.string() << "\n";
  for (std::size_t k = 0; k < trs.size(); ++k) {
    if (!trs[k].diverged) continue;
    err << error_record("divergence", trs[k].divergence_reason, kExitDivergence,
                        "seed " + std::to_string(cfg.seeds[k]) + " diverged", trs[k].diverged_at)
        << "\n";
    return kExitDivergence;
  }
  return kExitOk;
}

int do_theory(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  OrderParameterTable tab = theory_table(cfg);
  write_theory(out, tab);
  log << "theory: T=" << tab.T << " written to " << out.string() << "\n";
  return kExitOk;
}

int do_compare(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log, std::ostream& err) {
  OrderParameterTable tab = theory_table(cfg);
  write_theory(out / "theory", tab);
  std::vector<Trajectory> trs = simulate_seeds(cfg);
  std::vector<SeedObservables> obs;
  for (std::size_t k = 0; k < trs.size(); ++k) {
    write_trajectory(out / "simulation" / ("seed_" + std::to_string(cfg.seeds[k])), trs[k], cfg.dump_vectors);
    obs.push_back(observe(trs[k]));
  }
  write_summary(out / "simulation" / "summary.csv", trs);
  CompareReport rep = compare_report(tab, obs);
  {
    std::ofstream f(out / "compare.csv");
    f << "quantity,i,j,theory,sim_mean,sim_se,z\n";
    for (const auto& e : rep.entries)
      f << e.quantity << "," << e.i << "," << e.j << "," << fmt(e.theory) << "," << fmt(e.mean) << "," << fmt(e.se)
        << "," << fmt(e.z) << "\n";
  }
  nlohmann::json j;
  j["T"] = rep.T;
  j["seeds"] = rep.seeds;
  j["N"] = trs.empty() ? 0 : trs.front().N;
  nlohmann::json maxz;
  for (const char* q : {"c_phi", "c_gamma", "chi", "tau", "error"}) maxz[q] = num(rep.max_abs_z(q));
  j["max_abs_z"] = maxz;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : rep.entries)
    j["entries"].push_back({{"quantity", e.quantity}, {"i", e.i}, {"j", e.j}, {"theory", num(e.theory)},
                            {"sim_mean", num(e.mean)}, {"sim_se", num(e.se)}, {"z", num(e.z)}});
  std::ofstream(out / "compare.json") << j.dump(2) << "\n";
  log << "compare: max |z| over C_phi = " << fmt(rep.max_abs_z("c_phi")) << ", overall = " << fmt(rep.max_abs_z())
      << "\n";
  for (std::size_t k = 0; k < trs.size(); ++k)
    if (trs[k].diverged) {
      err << error_record("divergence", trs[k].divergence_reason, kExitDivergence,
                          "seed " + std::to_string(cfg.seeds[k]) + " diverged", trs[k].diverged_at)
          << "\n";
      return kExitDivergence;
    }
  return kExitOk;
}

SolverOptions solver_options(const ExperimentConfig& cfg) {
  SolverOptions opt = cfg.solver;
  opt.eta = cfg.eta;
  return opt;
}

int do_fixed_point(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log, std::ostream& err) {
  SpectralModel model = make_spectral_model(cfg.ensemble);
  QuadratureRule quad = make_quadrature(cfg);
  FixedPoint fp = solve_fixed_point(model, cfg.teacher, cfg.student, quad, solver_options(cfg));
  fs::create_directories(out);
  {
    std::ofstream f(out / "fixed_point.csv");
    f << "key,value\n";
    f << "status," << to_string(fp.status) << "\n";
    f << "iterations," << fp.iterations << "\n";
    f << "multistart_disagree," << (fp.multistart_disagree ? 1 : 0) << "\n";
    const std::pair<const char*, double> rows[] = {
        {"q", fp.q},           {"chi", fp.chi_star},         {"nu", fp.nu_star},        {"lambda", fp.lambda_star},
        {"zeta", fp.zeta_star}, {"b_hat", fp.b_hat_star},    {"c", fp.c_star},          {"c_phi", fp.c_phi_star},
        {"eta", cfg.eta},       {"mu_gamma", fp.mu_gamma},   {"at_margin", fp.at_margin}, {"residual", fp.residual}};
    for (const auto& [k, v] : rows) f << k << "," << fmt(v) << "\n";
  }
  log << "fixed-point: " << to_string(fp.status) << " chi=" << fmt(fp.chi_star) << " margin=" << fmt(fp.at_margin)
      << " mu=" << fmt(fp.mu_gamma) << "\n";
  if (!fp.converged) {
    err << error_record("error", to_string(fp.status), kExitNumerical,
                        "fixed-point iteration did not converge after " + std::to_string(fp.iterations) +
                            " iterations; margin at last iterate " + fmt(fp.at_margin))
        << "\n";
    return kExitNumerical;
  }
  TransientResult tr = transient_recursion(fp, model, cfg.teacher, cfg.student, cfg.eta, cfg.T, quad);
  if (tr.convergent) {
    std::ofstream f(out / "transient.csv");
    f << "t,delta_gamma,delta_phi,tail_ratio,c_gamma,c_phi,log_delta_gamma\n";
    for (std::size_t t = 0; t < tr.delta_gamma.size(); ++t)
      f << t + 1 << "," << fmt(tr.delta_gamma[t]) << "," << fmt(tr.delta_phi[t]) << "," << fmt(tr.tail_ratio[t])
        << "," << fmt(tr.c_gamma[t]) << "," << fmt(tr.c_phi[t]) << "," << fmt(std::log(tr.delta_gamma[t])) << "\n";
  }
  return kExitOk;
}

int do_phase_scan(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  std::vector<double> qs = cfg.scan_q.empty() ? std::vector<double>{cfg.q()} : cfg.scan_q;
  std::vector<double> etas = cfg.scan_eta.empty() ? std::vector<double>{cfg.eta} : cfg.scan_eta;
  PhaseScan scan = phase_scan(cfg.scan_beta0, cfg.scan_sigma0, qs, cfg.ensemble.kind, cfg.student, etas,
                              make_quadrature(cfg), solver_options(cfg), thread_cap());
  fs::create_directories(out);
  {
    std::ofstream f(out / "phase_scan.csv");
    f << "beta0,sigma0,q,status,chi,b_hat,c,at_margin";
    for (double e : etas) f << ",mu_eta_" << fmt(e);
    f << "\n";
    for (const auto& n : scan.nodes) {
      f << fmt(n.beta0) << "," << fmt(n.sigma0) << "," << fmt(n.q) << "," << to_string(n.fp.status) << ","
        << fmt(n.fp.chi_star) << "," << fmt(n.fp.b_hat_star) << "," << fmt(n.fp.c_star) << "," << fmt(n.margin);
      for (double m : n.mu) f << "," << fmt(m);
      f << "\n";
    }
  }
  {
    std::ofstream f(out / "crossings.csv");
    f << "axis,beta0,sigma0,q\n";
    for (const auto& c : scan.crossings)
      f << c.axis << "," << fmt(c.beta0) << "," << fmt(c.sigma0) << "," << fmt(c.q) << "\n";
  }
  log << "phase-scan: " << scan.nodes.size() << " nodes, " << scan.crossings.size() << " crossings\n";
  return kExitOk;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    cfg.validate();
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    switch (cfg.mode) {
      case Mode::Simulate: return do_simulate(cfg, out, log, err);
      case Mode::Theory: return do_theory(cfg, out, log);
      case Mode::Compare: return do_compare(cfg, out, log, err);
      case Mode::FixedPoint: return do_fixed_point(cfg, out, log, err);
      case Mode::PhaseScan: return do_phase_scan(cfg, out, log);
    }
    return kExitOk;
  } catch (const Error& e) {
    const int code = e.kind() == ErrorKind::Validation ? kExitValidation : kExitNumerical;
    err << error_record("error", to_string(e.kind()), code, e.what(), e.step()) << "\n";
    return code;
  } catch (const fs::filesystem_error& e) {
    err << error_record("error", "io", kExitValidation, e.what()) << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << error_record("error", "internal", kExitNumerical, e.what()) << "\n";
    return kExitNumerical;
  }
}

}  // namespace seqvamp
