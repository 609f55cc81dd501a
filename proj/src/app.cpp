#include "memstab/app.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "memstab/errors.hpp"

namespace memstab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json check_json(const CheckRecord& c) {
  return {{"name", c.name},
          {"passed", c.passed},
          {"measured", number_or_null(c.measured)},
          {"bound", number_or_null(c.bound)},
          {"slack", number_or_null(c.slack)},
          {"note", c.note}};
}

void print_hypotheses(const HypothesisReport& report, std::ostream& log) {
  for (const auto& r : report.records) {
    log << "  " << std::left << std::setw(4) << r.name << (r.passed ? "pass" : "FAIL");
    if (r.slack) log << "  slack " << *r.slack;
    if (!r.note.empty()) log << "  (" << r.note << ")";
    log << '\n';
  }
}

void print_certificate(const CertificateBundle& b, std::ostream& log) {
  if (!b.cert) {
    log << "no certificate: " << b.failure << '\n';
    return;
  }
  const auto& c = *b.cert;
  log << "certified: E|X(t)|^2 <= " << c.B << " exp(-" << c.sigma << " t)\n"
      << "  gamma1 " << c.gamma1 << "  gamma2 " << c.gamma2 << "  a " << c.a << "  sigma* "
      << c.sigma_star << "\n"
      << "  R1 " << c.R1 << "  R2 " << c.R2 << "  R3 " << c.R3 << "  M " << c.M
      << "  slack " << c.constraint_slack << '\n';
  if (!b.problem.g_env.alpha.identically_zero() || !b.problem.h_env.alpha.identically_zero())
    log << "  note: theta(t) weights alpha2, alpha3 by e^{sigma r}\n";
  if (b.as_cert) {
    log << "pathwise: |X(t)|^2 <= exp(" << b.as_cert->as_rate << ") exp(-" << b.as_cert->as_rate
        << " t) eventually; B1 " << b.as_cert->B1 << ", P(interval N) <= "
        << b.as_cert->interval_coeff << " exp(-" << b.as_cert->as_rate << " N)\n";
  } else {
    log << "no pathwise certificate: " << b.failure << '\n';
  }
}

}  // namespace

CertificateBundle certify(const HeatModelSpec& model, const CertificateOptions& opts) {
  CertificateBundle b;
  b.problem = map_heat_to_problem(model);
  try {
    b.cert = build_certificate(b.problem, opts);
  } catch (const Infeasible& e) {
    b.failure = e.what();
  } catch (const DivergentIntegral& e) {
    b.failure = e.what();
  }
  if (b.cert) {
    try {
      b.as_cert = build_as_certificate(b.problem, *b.cert);
    } catch (const Unbounded& e) {
      b.failure = e.what();
    }
  }
  b.hypotheses = check_hypotheses(b.problem, b.cert ? &*b.cert : nullptr, &model);
  return b;
}

json certificate_json(const CertificateBundle& b) {
  json doc;
  auto put = [&](const char* key, std::optional<double> v) {
    doc[key] = v ? number_or_null(*v) : json(nullptr);
  };
  const Certificate* c = b.cert ? &*b.cert : nullptr;
  const ASCertificate* a = b.as_cert ? &*b.as_cert : nullptr;
  put("gamma1", c ? std::optional(c->gamma1) : std::nullopt);
  put("gamma2", c ? std::optional(c->gamma2) : std::nullopt);
  put("sigma", c ? std::optional(c->sigma) : std::nullopt);
  put("a", c ? std::optional(c->a) : std::nullopt);
  put("R1", c ? std::optional(c->R1) : std::nullopt);
  put("R2", c ? std::optional(c->R2) : std::nullopt);
  put("R3", c ? std::optional(c->R3) : std::nullopt);
  put("M", c ? std::optional(c->M) : std::nullopt);
  put("B", c ? std::optional(c->B) : std::nullopt);
  put("constraint_slack", c ? std::optional(c->constraint_slack) : std::nullopt);
  put("B1", a ? std::optional(a->B1) : std::nullopt);
  put("as_rate", a ? std::optional(a->as_rate) : std::nullopt);
  put("interval_coeff", a ? std::optional(a->interval_coeff) : std::nullopt);
  return doc;
}

json report_json(const VerificationReport& report, const DecayFit& fit,
                 const ASDecayResult* as_result) {
  json doc;
  doc["passed"] = report.ok();
  doc["checks"] = json::array();
  for (const auto& c : report.checks) doc["checks"].push_back(check_json(c));
  doc["fit"] = {{"sigma_hat", number_or_null(fit.sigma_hat)},
                {"intercept", fit.intercept},
                {"r_squared", fit.r_squared},
                {"t_lo", fit.t_lo},
                {"t_hi", fit.t_hi},
                {"n_points", fit.n_points},
                {"status", fit.status == DecayFit::Status::Ok        ? "ok"
                           : fit.status == DecayFit::Status::AllZero ? "all_zero"
                                                                     : "degenerate"},
                {"message", fit.message}};
  if (as_result != nullptr) {
    json intervals = json::array();
    for (const auto& s : as_result->intervals) {
      intervals.push_back({{"N", s.N},
                           {"violations", s.violations},
                           {"frequency", s.frequency},
                           {"wilson_lower", s.wilson_lower},
                           {"bound", s.bound},
                           {"vacuous", s.vacuous},
                           {"passed", s.passed}});
    }
    doc["as_intervals"] = intervals;
    doc["last_violation"] = as_result->last_violation;
  }
  return doc;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_curve_csv(const fs::path& path, const MSCurve& curve, const Certificate* cert) {
  auto out = open_output(path);
  out << "t,mean_sq,ci_half,cert_bound\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const double t = curve.times[i];
    out << format_double(t) << ',' << format_double(curve.mean[i]) << ','
        << format_double(curve.half_width[i]) << ','
        << format_double(cert ? cert->bound(t) : std::nan("")) << '\n';
  }
}

void write_paths_summary_csv(const fs::path& path,
                             std::span<const std::vector<double>> interval_sups,
                             const ASCertificate* asc) {
  auto out = open_output(path);
  out << "path,N,interval_sup,threshold,violated\n";
  for (std::size_t p = 0; p < interval_sups.size(); ++p) {
    for (std::size_t N = 0; N < interval_sups[p].size(); ++N) {
      const double sup = interval_sups[p][N];
      const double threshold = asc ? asc->threshold(static_cast<int>(N)) : std::nan("");
      out << p << ',' << N << ',' << format_double(sup) << ',' << format_double(threshold) << ','
          << (asc && sup > threshold ? 1 : 0) << '\n';
    }
  }
}

VerifyOutcome run_verification(const RunConfig& cfg, CertificateBundle bundle) {
  if (!bundle.cert) throw std::logic_error("run_verification needs a certificate");
  VerifyOutcome out;
  out.bundle = std::move(bundle);
  const auto& cert = *out.bundle.cert;
  out.mc = run_monte_carlo(cfg.model, cfg.sim);

  out.report.checks.push_back(check_ms_bound(out.mc.curve, cert, cfg.verify.ci_mult));

  out.fit = fit_decay_rate(out.mc.curve, cfg.verify.window_fraction);
  CheckRecord rate;
  rate.name = "decay_rate";
  rate.measured = out.fit.sigma_hat;
  rate.bound = cfg.verify.min_rate_fraction * cert.sigma;
  rate.passed = out.fit.status != DecayFit::Status::Degenerate && out.fit.sigma_hat >= rate.bound;
  rate.slack = out.fit.sigma_hat - rate.bound;
  rate.note = out.fit.status == DecayFit::Status::Degenerate ? out.fit.message
                                                             : "fitted rate vs certified rate";
  out.report.checks.push_back(rate);

  out.report.checks.push_back(
      check_K_functional(out.mc.curve, cert, out.bundle.problem, cfg.verify.ci_mult));

  if (out.bundle.as_cert) {
    out.as_result = check_as_decay(out.mc.interval_sups, cert, *out.bundle.as_cert, cfg.verify.N0);
    out.report.checks.push_back(out.as_result->record);
  }
  return out;
}

std::vector<EnergyLevel> energy_refinement(const HeatModelSpec& model, const SimConfig& base,
                                           int levels, std::size_t paths, double T) {
  if (levels < 1) throw std::invalid_argument("energy refinement needs at least one level");
  SimConfig fine = base;
  fine.T = T;
  fine.dt = base.dt / std::ldexp(1.0, levels - 1);
  std::vector<EnergyLevel> out(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) out[l].dt = base.dt / std::ldexp(1.0, l);

  for (std::size_t path = 0; path < paths; ++path) {
    const auto fine_dW = brownian_increments(fine, path);
    for (int l = 0; l < levels; ++l) {
      const std::size_t group = std::size_t{1} << (levels - 1 - l);
      std::vector<double> dW(fine_dW.size() / group, 0.0);
      for (std::size_t i = 0; i < fine_dW.size(); ++i) dW[i / group] += fine_dW[i];
      SimConfig cfg = fine;
      cfg.dt = out[l].dt;
      cfg.retain_states = true;
      cfg.output_stride = dW.size();
      const auto rec = simulate_path_with_increments(model, cfg, dW);
      const auto res = energy_residual(rec, model);
      out[l].rms += res.rms / static_cast<double>(paths);
      out[l].final_abs += res.final_abs / static_cast<double>(paths);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_certify(const RunConfig& cfg, std::ostream& log) {
  const auto bundle = certify(cfg.model, cfg.cert);
  print_hypotheses(bundle.hypotheses, log);
  print_certificate(bundle, log);
  write_json(fs::path(cfg.out_dir) / "certificate.json", certificate_json(bundle));
  return bundle.cert && bundle.as_cert ? kExitOk : kExitInfeasible;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const auto bundle = certify(cfg.model, cfg.cert);
  const auto mc = run_monte_carlo(cfg.model, cfg.sim);
  const fs::path dir(cfg.out_dir);
  write_curve_csv(dir / "curve.csv", mc.curve, bundle.cert ? &*bundle.cert : nullptr);
  write_paths_summary_csv(dir / "paths_summary.csv", mc.interval_sups,
                          bundle.as_cert ? &*bundle.as_cert : nullptr);
  const auto& curve = mc.curve;
  log << "simulated " << curve.n_paths << " paths to T = " << cfg.sim.T << ": E|X|^2 "
      << curve.mean.front() << " -> " << curve.mean.back() << '\n';
  if (!bundle.cert) log << "no certificate: " << bundle.failure << '\n';
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg, std::ostream& log) {
  auto bundle = certify(cfg.model, cfg.cert);
  const fs::path dir(cfg.out_dir);
  print_certificate(bundle, log);
  write_json(dir / "certificate.json", certificate_json(bundle));
  if (!bundle.cert) return kExitInfeasible;

  const auto out = run_verification(cfg, std::move(bundle));
  write_curve_csv(dir / "curve.csv", out.mc.curve, &*out.bundle.cert);
  write_paths_summary_csv(dir / "paths_summary.csv", out.mc.interval_sups,
                          out.bundle.as_cert ? &*out.bundle.as_cert : nullptr);
  write_json(dir / "report.json",
             report_json(out.report, out.fit, out.as_result ? &*out.as_result : nullptr));

  for (const auto& c : out.report.checks) {
    log << "  " << std::left << std::setw(14) << c.name << (c.passed ? "pass" : "FAIL")
        << "  measured " << c.measured << "  bound " << c.bound << "  (" << c.note << ")\n";
  }
  if (!out.bundle.as_cert) return kExitInfeasible;
  return out.report.ok() ? kExitOk : kExitCheckFailed;
}

int cmd_energy(const RunConfig& cfg, std::ostream& log) {
  const auto levels =
      energy_refinement(cfg.model, cfg.sim, cfg.energy.levels, cfg.energy.paths, cfg.energy.T);
  auto out = open_output(fs::path(cfg.out_dir) / "energy.csv");
  out << "dt,rms_residual,final_abs_residual,ratio\n";
  bool ok = true;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const double ratio = l == 0 ? std::nan("") : levels[l - 1].rms / levels[l].rms;
    if (l > 0 && !(ratio >= cfg.energy.min_ratio)) ok = false;
    out << format_double(levels[l].dt) << ',' << format_double(levels[l].rms) << ','
        << format_double(levels[l].final_abs) << ',' << format_double(ratio) << '\n';
    log << "  dt " << levels[l].dt << "  rms " << levels[l].rms;
    if (l > 0) log << "  ratio " << ratio;
    log << '\n';
  }
  log << (ok ? "energy identity defect shrinks with dt\n"
             : "energy identity defect does not shrink fast enough\n");
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_demo(const RunConfig& cfg, std::ostream& log) {
  log << "stochastic heat equation with memory: nu " << cfg.model.nu << ", b1 " << cfg.model.b1
      << ", b2 " << cfg.model.b2 << ", " << cfg.sim.n_paths << " paths, dt " << cfg.sim.dt
      << ", T " << cfg.sim.T << '\n';
  return cmd_verify(cfg, log);
}

RunConfig demo_config() {
  RunConfig cfg;
  auto& m = cfg.model;
  m.nu = 5.0;
  m.b1 = 1.0;
  m.b2 = 1.0;
  m.k = 1.0;
  m.k1 = TimeFunction::exponential(0.1, 1.0);
  m.k2 = TimeFunction::exponential(0.1, 1.0);
  m.p_coeffs = {0.1};
  m.phi = InitialSegment::constant({1.0});
  m.n_modes = 16;
  cfg.sim.dt = 1.0 / 1024.0;
  cfg.sim.T = 10.0;
  cfg.sim.n_paths = 200;
  cfg.sim.master_seed = 20240601;
  cfg.out_dir = "demo_out";
  return cfg;
}

}  // namespace memstab
