#pragma once

// Deterministic generator of synthetic test-data bundles in the CSV layout
// read by `ingest_csv`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "elqa/signal_store.hpp"

namespace elqa {

struct GenConfig {
  std::uint64_t seed = 0;
  std::size_t n_circuits = 12;
  std::vector<std::pair<std::string, MachineState>> campaigns = {
      {"LS1-warm", MachineState::warm},
      {"LS1-cooldown", MachineState::cooling_down},
      {"LS1-cold", MachineState::cold},
  };
  std::size_t samples_per_measurement = 200;
  double nominal_capacitance_F = 100e-9;
  double capacitance_jitter_rel = 0.05;
  double missing_rate = 0.0;
  double tp4_noise_rate = 0.1;
  double tp4_noise_amplitude_rel = 0.05;
};

struct GenReport {
  std::map<std::string, std::size_t> counts;  // file name -> data rows
  std::vector<std::string> anomalous_ids;     // sorted
  std::map<std::string, double> circuit_capacitance_F;

  /// `{"counts":{...},"anomalous_ids":[...],"circuit_capacitance_F":{...}}`
  std::string to_json() const;
};

/// Throws InvalidConfig when a rate or count is out of range.
void validate(const GenConfig& config);

/// Writes the four CSV files into `out_dir` (created if needed).
/// Output bytes are a pure function of `config`. Throws InvalidConfig, IoError.
GenReport generate(const GenConfig& config, const std::filesystem::path& out_dir);

}  // namespace elqa
