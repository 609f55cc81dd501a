#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "json.hpp"
#include "memstab/certificate.hpp"
#include "memstab/config.hpp"
#include "memstab/simulate.hpp"
#include "memstab/verify.hpp"

namespace memstab {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitInfeasible = 2,
  kExitConfigError = 3,
};

/// Certificate plus its pathwise supplement, or the reason none exists.
struct CertificateBundle {
  ProblemSpec problem;
  HypothesisReport hypotheses;
  std::optional<Certificate> cert;
  std::optional<ASCertificate> as_cert;
  std::string failure;
};

CertificateBundle certify(const HeatModelSpec& model, const CertificateOptions& opts);

nlohmann::json certificate_json(const CertificateBundle& bundle);
nlohmann::json report_json(const VerificationReport& report, const DecayFit& fit,
                           const ASDecayResult* as_result);

/// Shortest decimal that round-trips through IEEE-754 double (17 significant
/// digits), used for every CSV field.
std::string format_double(double v);

void write_curve_csv(const std::filesystem::path& path, const MSCurve& curve,
                     const Certificate* cert);
void write_paths_summary_csv(const std::filesystem::path& path,
                             std::span<const std::vector<double>> interval_sups,
                             const ASCertificate* asc);

struct VerifyOutcome {
  CertificateBundle bundle;
  MonteCarloResult mc;
  VerificationReport report;
  DecayFit fit;
  std::optional<ASDecayResult> as_result;
};

/// Simulation plus every confrontation check against the certificate.
/// Requires bundle.cert.
VerifyOutcome run_verification(const RunConfig& cfg, CertificateBundle bundle);

struct EnergyLevel {
  double dt = 0.0;
  double rms = 0.0;        // averaged over paths
  double final_abs = 0.0;  // averaged over paths
};

/// Refinement study of the energy-identity defect: dt, dt/2, ... with each
/// path driven by one Brownian path summed down to the coarser grids.
std::vector<EnergyLevel> energy_refinement(const HeatModelSpec& model, const SimConfig& base,
                                           int levels, std::size_t paths, double T);

int cmd_certify(const RunConfig& cfg, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_verify(const RunConfig& cfg, std::ostream& log);
int cmd_energy(const RunConfig& cfg, std::ostream& log);
int cmd_demo(const RunConfig& cfg, std::ostream& log);

/// The feasible stochastic-heat scenario: nu = 5, b1 = b2 = 1, k = 1,
/// k1 = k2 = 0.1 e^{-t}, p = 0.1 e_1, phi = e_1, 16 modes, dt = 2^-10, T = 10,
/// 200 paths.
RunConfig demo_config();

}  // namespace memstab
