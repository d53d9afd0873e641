#pragma once

// Domain model of electrical quality-assurance test data and the in-memory
// repository that serves it: circuits, campaigns, measurements with their
// sampled signals, and cleansing annotations.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "elqa/text.hpp"

namespace elqa {

enum class Sector { S12, S23, S34, S45, S56, S67, S78, S81 };
enum class MachineState { cold, warm, cooling_down, warming_up };
enum class TestType { TP4, DOC, MIC, HVQ };
enum class Variant { M1, M2 };
enum class Verdict { assured, test_only, suspect };

std::string_view to_string(Sector v);
std::string_view to_string(MachineState v);
std::string_view to_string(TestType v);
std::string_view to_string(Variant v);
std::string_view to_string(Verdict v);

std::optional<Sector> parse_sector(std::string_view s);
std::optional<MachineState> parse_machine_state(std::string_view s);
std::optional<TestType> parse_test_type(std::string_view s);
std::optional<Variant> parse_variant(std::string_view s);
std::optional<Verdict> parse_verdict(std::string_view s);

struct Circuit {
  std::string circuit_id;
  std::string circuit_type;
  Sector sector = Sector::S12;
  std::string magnet_position;
  std::string manufacturer;

  bool operator==(const Circuit&) const = default;
};

struct Campaign {
  std::string campaign_id;
  std::string label;
  MachineState machine_state = MachineState::cold;
  Timestamp started_at{};

  bool operator==(const Campaign&) const = default;
};

/// One acquired point. Absent channel values are `nullopt`, never NaN.
struct Sample {
  double t_s = 0.0;
  std::optional<double> voltage_V;
  std::optional<double> current_A;

  bool operator==(const Sample&) const = default;
};

struct Annotation {
  Verdict verdict = Verdict::assured;
  std::string author;
  std::string note;
  Timestamp created_at{};

  bool operator==(const Annotation&) const = default;
};

struct Measurement {
  std::string measurement_id;
  std::string circuit_id;
  std::string campaign_id;
  TestType test_type = TestType::HVQ;
  Variant variant = Variant::M1;
  std::string operator_name;
  Timestamp performed_at{};
  std::optional<double> tunnel_temperature_C;
  std::optional<double> tunnel_humidity_pct;
  std::vector<Sample> samples;
  std::optional<Annotation> annotation;

  bool operator==(const Measurement&) const = default;
};

/// Every supplied predicate must match; unset predicates pass everything.
struct MeasurementFilter {
  std::optional<std::string> circuit_type;
  std::optional<std::string> circuit_id;
  std::optional<TestType> test_type;
  std::optional<std::string> campaign_id;
};

enum class DistinctField { circuit_type, sector, test_type, campaign_id };

/// Throws UnknownField for names outside the four supported fields.
DistinctField parse_distinct_field(std::string_view name);

/// In-memory store. Reads may run concurrently; `annotate` takes an
/// exclusive lock, so writers are serialized. Iteration order of circuits,
/// campaigns and measurements is insertion order.
///
/// Moving a repository is not thread-safe; do it before sharing.
class Repository {
 public:
  Repository() = default;
  Repository(Repository&& other) noexcept;
  Repository& operator=(Repository&& other) noexcept;
  Repository(const Repository&) = delete;
  Repository& operator=(const Repository&) = delete;

  /// Throws MalformedRow on a duplicate id.
  void add_circuit(Circuit circuit);
  void add_campaign(Campaign campaign);
  /// Throws DanglingReference for unresolved circuit/campaign ids and
  /// MalformedRow for duplicate ids or non-increasing sample times.
  void add_measurement(Measurement measurement);

  /// Ordered by performed_at, ties by measurement_id.
  std::vector<Measurement> query_measurements(const MeasurementFilter& filter) const;

  /// De-duplicated and lexicographically sorted.
  std::vector<std::string> distinct_values(DistinctField field) const;
  std::vector<std::string> distinct_values(std::string_view field) const;

  /// Replaces any earlier annotation (last write wins) and appends to the
  /// journal when one is configured. Throws UnknownMeasurement.
  Measurement annotate(const std::string& measurement_id, const Annotation& annotation);

  std::optional<Annotation> annotation_of(const std::string& measurement_id) const;
  std::optional<Circuit> find_circuit(const std::string& circuit_id) const;
  std::optional<Campaign> find_campaign(const std::string& campaign_id) const;
  std::optional<Measurement> find_measurement(const std::string& measurement_id) const;

  std::vector<Circuit> circuits() const;
  std::vector<Campaign> campaigns() const;
  std::vector<Measurement> measurements() const;

  std::size_t circuit_count() const;
  std::size_t campaign_count() const;
  std::size_t measurement_count() const;

  /// Subsequent annotations are appended to `path` as JSON lines.
  void set_journal(std::filesystem::path path);
  const std::optional<std::filesystem::path>& journal() const { return journal_; }

  /// Applies every journal line in order, without re-appending them.
  /// Returns the number of annotations applied. Throws MalformedRow on a bad
  /// line, UnknownMeasurement on an id that is not loaded.
  std::size_t replay_journal(const std::filesystem::path& path);

 private:
  Measurement annotate_locked(const std::string& measurement_id, const Annotation& annotation);

  mutable std::shared_mutex mutex_;
  std::vector<Circuit> circuits_;
  std::vector<Campaign> campaigns_;
  std::vector<Measurement> measurements_;
  std::map<std::string, std::size_t, std::less<>> circuit_index_;
  std::map<std::string, std::size_t, std::less<>> campaign_index_;
  std::map<std::string, std::size_t, std::less<>> measurement_index_;
  std::optional<std::filesystem::path> journal_;
};

/// Loads `circuits.csv`, `campaigns.csv`, `measurements.csv` and
/// `samples.csv` from `dir`. Errors name the offending file and line.
Repository ingest_csv(const std::filesystem::path& dir);

/// Serializes an annotation as one journal line (no trailing newline).
std::string annotation_journal_line(const std::string& measurement_id, const Annotation& annotation);

}  // namespace elqa
