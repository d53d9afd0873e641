#include "elqa/synth_gen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "elqa/error.hpp"
#include "elqa/rng.hpp"

namespace elqa {

namespace {

// Arbitrary but plausible constants; nothing downstream depends on them.
constexpr std::array<std::string_view, 3> kCircuitTypes{"RB", "RQ", "RCS"};
constexpr std::array<std::string_view, 3> kManufacturers{"ASG", "Alstom-Jeumont", "Noell"};
constexpr double kRampDuration_s = 10.0;
constexpr std::array<double, 2> kRampRate_V_per_s{50.0, 100.0};  // M1, M2
constexpr double kTunnelTempLo_C = 18.0;
constexpr double kTunnelTempHi_C = 24.0;
constexpr double kHumidityLo_pct = 30.0;
constexpr double kHumidityHi_pct = 60.0;
constexpr int kCampaignSpacingDays = 60;

// First data start: 2013-02-14T08:00:00Z.
Timestamp first_campaign_start() {
  using namespace std::chrono;
  return sys_days{year{2013} / February / 14} + hours{8};
}

std::string padded(const char* prefix, std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, value);
  return buf;
}

double round_to_tenth(double x) { return std::round(x * 10.0) / 10.0; }

/// Picks `count` distinct indices out of [0, n) by a partial Fisher-Yates
/// shuffle; returned sorted.
std::vector<std::size_t> pick_indices(SplitMix64& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::size_t rounded_count(double rate, std::size_t total) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(total)));
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  out << content;
  if (!out.flush()) throw IoError("write failed on " + path.string());
}

bool in_unit_interval(double x) { return std::isfinite(x) && x >= 0.0 && x < 1.0; }

}  // namespace

void validate(const GenConfig& c) {
  if (c.n_circuits < 1) throw InvalidConfig("n_circuits must be >= 1");
  if (c.campaigns.empty()) throw InvalidConfig("at least one campaign is required");
  if (c.samples_per_measurement < 1) throw InvalidConfig("samples_per_measurement must be >= 1");
  if (!(std::isfinite(c.nominal_capacitance_F) && c.nominal_capacitance_F > 0.0)) {
    throw InvalidConfig("nominal_capacitance_F must be > 0");
  }
  if (!in_unit_interval(c.capacitance_jitter_rel)) throw InvalidConfig("capacitance_jitter_rel not in [0,1)");
  if (!in_unit_interval(c.missing_rate)) throw InvalidConfig("missing_rate not in [0,1)");
  if (!in_unit_interval(c.tp4_noise_rate)) throw InvalidConfig("tp4_noise_rate not in [0,1)");
  if (!(std::isfinite(c.tp4_noise_amplitude_rel) && c.tp4_noise_amplitude_rel >= 0.0)) {
    throw InvalidConfig("tp4_noise_amplitude_rel must be >= 0");
  }
}

std::string GenReport::to_json() const {
  nlohmann::json j;
  j["counts"] = counts;
  j["anomalous_ids"] = anomalous_ids;
  j["circuit_capacitance_F"] = circuit_capacitance_F;
  return j.dump();
}

GenReport generate(const GenConfig& config, const std::filesystem::path& out_dir) {
  validate(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  // Draw order is part of the output contract: circuits, anomaly selection,
  // then per measurement (operator, temperature, humidity, noise, voltage
  // gaps, current gaps).
  SplitMix64 rng(config.seed);
  GenReport report;

  struct CircuitDraw {
    std::string id;
    double capacitance_F;
  };
  std::vector<CircuitDraw> drawn;
  std::ostringstream circuits;
  circuits << "circuit_id,circuit_type,sector,magnet_position,manufacturer\n";
  for (std::size_t i = 0; i < config.n_circuits; ++i) {
    const std::string id = padded("C", i + 1, 3);
    const auto type = kCircuitTypes[rng.below(kCircuitTypes.size())];
    const auto sector = static_cast<Sector>(i % 8);
    const std::size_t cell = 8 + rng.below(27);
    const char side = rng.below(2) == 0 ? 'L' : 'R';
    const auto sector_name = to_string(sector);
    const std::string position = "A" + std::to_string(cell) + side + std::string(1, sector_name[1]);
    const auto maker = kManufacturers[rng.below(kManufacturers.size())];
    const double c_F =
        config.nominal_capacitance_F * (1.0 + config.capacitance_jitter_rel * (2.0 * rng.uniform() - 1.0));
    drawn.push_back({id, c_F});
    report.circuit_capacitance_F[id] = c_F;
    circuits << join_csv_record({id, std::string(type), std::string(sector_name), position, std::string(maker)})
             << '\n';
  }

  std::ostringstream campaigns;
  campaigns << "campaign_id,label,machine_state,started_at\n";
  std::vector<Timestamp> campaign_start;
  for (std::size_t j = 0; j < config.campaigns.size(); ++j) {
    const Timestamp start = first_campaign_start() + std::chrono::days{kCampaignSpacingDays * static_cast<int>(j)};
    campaign_start.push_back(start);
    const auto& [label, state] = config.campaigns[j];
    campaigns << join_csv_record({padded("CMP", j + 1, 2), label, std::string(to_string(state)),
                                  format_timestamp(start)})
              << '\n';
  }

  const std::size_t total = config.n_circuits * config.campaigns.size() * 2;
  const std::vector<std::size_t> anomalous = pick_indices(rng, total, rounded_count(config.tp4_noise_rate, total));

  std::ostringstream measurements;
  measurements << "measurement_id,circuit_id,campaign_id,test_type,variant,operator,performed_at,"
                  "tunnel_temperature_C,tunnel_humidity_pct\n";
  std::ostringstream samples;
  samples << "measurement_id,t_s,voltage_V,current_A\n";

  const std::size_t n = config.samples_per_measurement;
  const std::size_t missing_per_channel = rounded_count(config.missing_rate, n);
  std::size_t sample_rows = 0;
  std::size_t ordinal = 0;
  for (std::size_t j = 0; j < config.campaigns.size(); ++j) {
    for (std::size_t i = 0; i < drawn.size(); ++i) {
      for (std::size_t v = 0; v < 2; ++v, ++ordinal) {
        const std::string id = padded("m-", ordinal + 1, 5);
        const Timestamp at = campaign_start[j] + std::chrono::hours{2 * static_cast<int>(i)} +
                             std::chrono::minutes{30 * static_cast<int>(v)};
        const std::string op = "operator-" + std::to_string(1 + rng.below(4));
        const double temp = round_to_tenth(rng.uniform(kTunnelTempLo_C, kTunnelTempHi_C));
        const double humidity = round_to_tenth(rng.uniform(kHumidityLo_pct, kHumidityHi_pct));
        measurements << join_csv_record({id, drawn[i].id, padded("CMP", j + 1, 2), "HVQ", v == 0 ? "M1" : "M2",
                                         op, format_timestamp(at), format_double(temp),
                                         format_double(humidity)})
                     << '\n';

        // Linear charge ramp at constant current: C = I / (dV/dt).
        const double rate = kRampRate_V_per_s[v];
        const double current = drawn[i].capacitance_F * rate;
        const double dt = n > 1 ? kRampDuration_s / static_cast<double>(n - 1) : 0.0;
        std::vector<double> t(n), volts(n);
        for (std::size_t k = 0; k < n; ++k) {
          t[k] = static_cast<double>(k) * dt;
          volts[k] = rate * t[k];
        }
        if (std::binary_search(anomalous.begin(), anomalous.end(), ordinal)) {
          report.anomalous_ids.push_back(id);
          const double amplitude = config.tp4_noise_amplitude_rel * rate * kRampDuration_s;
          for (double& x : volts) x += rng.uniform(-amplitude, amplitude);
        }
        const auto v_gaps = pick_indices(rng, n, missing_per_channel);
        const auto i_gaps = pick_indices(rng, n, missing_per_channel);
        for (std::size_t k = 0; k < n; ++k) {
          const bool v_missing = std::binary_search(v_gaps.begin(), v_gaps.end(), k);
          const bool i_missing = std::binary_search(i_gaps.begin(), i_gaps.end(), k);
          samples << id << ',' << format_double(t[k]) << ',' << (v_missing ? "" : format_double(volts[k])) << ','
                  << (i_missing ? "" : format_double(current)) << '\n';
          ++sample_rows;
        }
      }
    }
  }

  write_file(out_dir / "circuits.csv", circuits.str());
  write_file(out_dir / "campaigns.csv", campaigns.str());
  write_file(out_dir / "measurements.csv", measurements.str());
  write_file(out_dir / "samples.csv", samples.str());

  report.counts = {{"circuits.csv", config.n_circuits},
                   {"campaigns.csv", config.campaigns.size()},
                   {"measurements.csv", total},
                   {"samples.csv", sample_rows}};
  std::sort(report.anomalous_ids.begin(), report.anomalous_ids.end());
  return report;
}

}  // namespace elqa
