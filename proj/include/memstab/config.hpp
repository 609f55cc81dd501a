#pragma once

#include <string>

#include "json.hpp"
#include "memstab/certificate.hpp"
#include "memstab/model.hpp"
#include "memstab/simulate.hpp"

namespace memstab {

struct VerifyOptions {
  double ci_mult = 3.0;
  double window_fraction = 0.5;
  int N0 = 2;
  double min_rate_fraction = 0.8;  // fitted rate must reach this share of sigma
};

struct EnergyOptions {
  int levels = 4;
  std::size_t paths = 20;
  double T = 2.0;
  double min_ratio = 1.7;
};

struct RunConfig {
  HeatModelSpec model;
  SimConfig sim;
  CertificateOptions cert;
  VerifyOptions verify;
  EnergyOptions energy;
  std::string out_dir = "out";
};

/// Parses and validates a configuration document. Throws ConfigError naming
/// the offending dotted key, or carrying the parser's position.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

/// Configuration from an already parsed document.
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& cfg);

/// Checks cross-field constraints (integrability of k1, k2, step stability).
void validate_config(const RunConfig& cfg);

}  // namespace memstab
