#pragma once

// Test fixtures: scratch directories and seeded random measurements.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "elqa/rng.hpp"
#include "elqa/signal_store.hpp"

namespace fixtures {

/// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("elqa-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// A right-skewed signal: linear ramp plus exponential noise, with up to 25%
/// of the voltage values and some current values absent. The ramp spans at
/// most one noise scale, so skewness and kurtosis stay well away from zero.
inline elqa::Measurement random_skewed_measurement(elqa::SplitMix64& rng, const std::string& id) {
  elqa::Measurement m;
  m.measurement_id = id;
  m.circuit_id = "C001";
  m.campaign_id = "CMP01";
  const std::size_t n = 200 + rng.below(201);
  const double scale = std::exp(rng.uniform(std::log(0.1), std::log(100.0)));
  const double offset = rng.uniform(-50.0, 50.0) * scale;
  const double slope = rng.uniform(0.05, 0.1) * scale;
  const double dt = rng.uniform(0.01, 0.1);
  const double missing = rng.uniform(0.0, 0.25);
  const double current = rng.uniform(1e-7, 1e-3);
  const double span = 10.0 / (dt * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    elqa::Sample s;
    s.t_s = static_cast<double>(i) * dt * (1.0 + 0.2 * rng.uniform());
    if (i > 0) s.t_s = std::max(s.t_s, m.samples.back().t_s + dt * 0.5);
    const double noise = -std::log1p(-rng.uniform()) * scale;
    s.voltage_V = offset + slope * span * s.t_s + noise;
    s.current_A = current * (1.0 + 0.1 * rng.uniform());
    m.samples.push_back(s);
  }
  // Absent values are chosen with exact counts so the 30% cap is never hit.
  const auto drop = [&](auto member, double rate) {
    const std::size_t k = static_cast<std::size_t>(rate * static_cast<double>(n));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(idx[i], idx[i + rng.below(n - i)]);
      m.samples[idx[i]].*member = std::nullopt;
    }
  };
  drop(&elqa::Sample::voltage_V, missing);
  drop(&elqa::Sample::current_A, rng.uniform(0.0, 0.2));
  return m;
}

}  // namespace fixtures
