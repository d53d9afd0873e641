#include "elqa/signal_store.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <utility>

#include <json.hpp>

#include "elqa/error.hpp"

namespace elqa {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

constexpr std::array<std::string_view, 8> kSectorNames{"S12", "S23", "S34", "S45",
                                                       "S56", "S67", "S78", "S81"};
constexpr std::array<std::string_view, 4> kMachineStateNames{"cold", "warm", "cooling_down",
                                                             "warming_up"};
constexpr std::array<std::string_view, 4> kTestTypeNames{"TP4", "DOC", "MIC", "HVQ"};
constexpr std::array<std::string_view, 2> kVariantNames{"M1", "M2"};
constexpr std::array<std::string_view, 3> kVerdictNames{"assured", "test_only", "suspect"};

bool measurement_order(const Measurement& a, const Measurement& b) {
  if (a.performed_at != b.performed_at) return a.performed_at < b.performed_at;
  return a.measurement_id < b.measurement_id;
}

}  // namespace

std::string_view to_string(Sector v) { return kSectorNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(MachineState v) { return kMachineStateNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(TestType v) { return kTestTypeNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Verdict v) { return kVerdictNames[static_cast<std::size_t>(v)]; }

std::optional<Sector> parse_sector(std::string_view s) { return lookup<Sector>(kSectorNames, s); }
std::optional<MachineState> parse_machine_state(std::string_view s) {
  return lookup<MachineState>(kMachineStateNames, s);
}
std::optional<TestType> parse_test_type(std::string_view s) { return lookup<TestType>(kTestTypeNames, s); }
std::optional<Variant> parse_variant(std::string_view s) { return lookup<Variant>(kVariantNames, s); }
std::optional<Verdict> parse_verdict(std::string_view s) { return lookup<Verdict>(kVerdictNames, s); }

DistinctField parse_distinct_field(std::string_view name) {
  if (name == "circuit_type") return DistinctField::circuit_type;
  if (name == "sector") return DistinctField::sector;
  if (name == "test_type") return DistinctField::test_type;
  if (name == "campaign_id") return DistinctField::campaign_id;
  throw UnknownField(std::string(name));
}

// --- Repository -------------------------------------------------------------

Repository::Repository(Repository&& other) noexcept
    : circuits_(std::move(other.circuits_)),
      campaigns_(std::move(other.campaigns_)),
      measurements_(std::move(other.measurements_)),
      circuit_index_(std::move(other.circuit_index_)),
      campaign_index_(std::move(other.campaign_index_)),
      measurement_index_(std::move(other.measurement_index_)),
      journal_(std::move(other.journal_)) {}

Repository& Repository::operator=(Repository&& other) noexcept {
  if (this != &other) {
    circuits_ = std::move(other.circuits_);
    campaigns_ = std::move(other.campaigns_);
    measurements_ = std::move(other.measurements_);
    circuit_index_ = std::move(other.circuit_index_);
    campaign_index_ = std::move(other.campaign_index_);
    measurement_index_ = std::move(other.measurement_index_);
    journal_ = std::move(other.journal_);
  }
  return *this;
}

void Repository::add_circuit(Circuit circuit) {
  std::unique_lock lock(mutex_);
  if (circuit_index_.contains(circuit.circuit_id)) {
    throw MalformedRow("duplicate circuit_id " + circuit.circuit_id);
  }
  circuit_index_.emplace(circuit.circuit_id, circuits_.size());
  circuits_.push_back(std::move(circuit));
}

void Repository::add_campaign(Campaign campaign) {
  std::unique_lock lock(mutex_);
  if (campaign_index_.contains(campaign.campaign_id)) {
    throw MalformedRow("duplicate campaign_id " + campaign.campaign_id);
  }
  campaign_index_.emplace(campaign.campaign_id, campaigns_.size());
  campaigns_.push_back(std::move(campaign));
}

void Repository::add_measurement(Measurement measurement) {
  std::unique_lock lock(mutex_);
  if (measurement_index_.contains(measurement.measurement_id)) {
    throw MalformedRow("duplicate measurement_id " + measurement.measurement_id);
  }
  if (!circuit_index_.contains(measurement.circuit_id)) throw DanglingReference(measurement.circuit_id);
  if (!campaign_index_.contains(measurement.campaign_id)) throw DanglingReference(measurement.campaign_id);
  for (std::size_t i = 0; i < measurement.samples.size(); ++i) {
    const double t = measurement.samples[i].t_s;
    if (!std::isfinite(t) || t < 0.0 || (i > 0 && t <= measurement.samples[i - 1].t_s)) {
      throw MalformedRow("sample times of " + measurement.measurement_id +
                         " must be finite, non-negative and strictly increasing");
    }
  }
  measurement_index_.emplace(measurement.measurement_id, measurements_.size());
  measurements_.push_back(std::move(measurement));
}

std::vector<Measurement> Repository::query_measurements(const MeasurementFilter& filter) const {
  std::shared_lock lock(mutex_);
  std::vector<Measurement> out;
  for (const Measurement& m : measurements_) {
    if (filter.circuit_id && m.circuit_id != *filter.circuit_id) continue;
    if (filter.campaign_id && m.campaign_id != *filter.campaign_id) continue;
    if (filter.test_type && m.test_type != *filter.test_type) continue;
    if (filter.circuit_type) {
      const Circuit& c = circuits_[circuit_index_.find(m.circuit_id)->second];
      if (c.circuit_type != *filter.circuit_type) continue;
    }
    out.push_back(m);
  }
  std::sort(out.begin(), out.end(), measurement_order);
  return out;
}

std::vector<std::string> Repository::distinct_values(DistinctField field) const {
  std::shared_lock lock(mutex_);
  std::set<std::string, std::less<>> values;
  switch (field) {
    case DistinctField::circuit_type:
      for (const Circuit& c : circuits_) values.insert(c.circuit_type);
      break;
    case DistinctField::sector:
      for (const Circuit& c : circuits_) values.emplace(to_string(c.sector));
      break;
    case DistinctField::test_type:
      for (const Measurement& m : measurements_) values.emplace(to_string(m.test_type));
      break;
    case DistinctField::campaign_id:
      for (const Campaign& c : campaigns_) values.insert(c.campaign_id);
      break;
  }
  return {values.begin(), values.end()};
}

std::vector<std::string> Repository::distinct_values(std::string_view field) const {
  return distinct_values(parse_distinct_field(field));
}

Measurement Repository::annotate(const std::string& measurement_id, const Annotation& annotation) {
  std::unique_lock lock(mutex_);
  Measurement updated = annotate_locked(measurement_id, annotation);
  if (journal_) {
    std::ofstream out(*journal_, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to " + journal_->string());
    out << annotation_journal_line(measurement_id, annotation) << '\n';
    if (!out.flush()) throw IoError("write failed on " + journal_->string());
  }
  return updated;
}

Measurement Repository::annotate_locked(const std::string& measurement_id, const Annotation& annotation) {
  auto it = measurement_index_.find(measurement_id);
  if (it == measurement_index_.end()) throw UnknownMeasurement(measurement_id);
  Measurement& m = measurements_[it->second];
  m.annotation = annotation;
  return m;
}

std::optional<Annotation> Repository::annotation_of(const std::string& measurement_id) const {
  std::shared_lock lock(mutex_);
  auto it = measurement_index_.find(measurement_id);
  if (it == measurement_index_.end()) return std::nullopt;
  return measurements_[it->second].annotation;
}

std::optional<Circuit> Repository::find_circuit(const std::string& circuit_id) const {
  std::shared_lock lock(mutex_);
  auto it = circuit_index_.find(circuit_id);
  if (it == circuit_index_.end()) return std::nullopt;
  return circuits_[it->second];
}

std::optional<Campaign> Repository::find_campaign(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  auto it = campaign_index_.find(campaign_id);
  if (it == campaign_index_.end()) return std::nullopt;
  return campaigns_[it->second];
}

std::optional<Measurement> Repository::find_measurement(const std::string& measurement_id) const {
  std::shared_lock lock(mutex_);
  auto it = measurement_index_.find(measurement_id);
  if (it == measurement_index_.end()) return std::nullopt;
  return measurements_[it->second];
}

std::vector<Circuit> Repository::circuits() const {
  std::shared_lock lock(mutex_);
  return circuits_;
}

std::vector<Campaign> Repository::campaigns() const {
  std::shared_lock lock(mutex_);
  return campaigns_;
}

std::vector<Measurement> Repository::measurements() const {
  std::shared_lock lock(mutex_);
  return measurements_;
}

std::size_t Repository::circuit_count() const {
  std::shared_lock lock(mutex_);
  return circuits_.size();
}

std::size_t Repository::campaign_count() const {
  std::shared_lock lock(mutex_);
  return campaigns_.size();
}

std::size_t Repository::measurement_count() const {
  std::shared_lock lock(mutex_);
  return measurements_.size();
}

void Repository::set_journal(std::filesystem::path path) {
  std::unique_lock lock(mutex_);
  journal_ = std::move(path);
}

std::size_t Repository::replay_journal(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path.string());
  std::unique_lock lock(mutex_);
  std::size_t applied = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw MalformedRow(where);
    try {
      const auto verdict = parse_verdict(j.at("verdict").get<std::string>());
      const auto created = parse_timestamp(j.at("created_at").get<std::string>());
      if (!verdict || !created) throw MalformedRow(where);
      Annotation a{*verdict, j.at("author").get<std::string>(), j.at("note").get<std::string>(), *created};
      annotate_locked(j.at("measurement_id").get<std::string>(), a);
    } catch (const nlohmann::json::exception&) {
      throw MalformedRow(where);
    }
    ++applied;
  }
  return applied;
}

std::string annotation_journal_line(const std::string& measurement_id, const Annotation& annotation) {
  nlohmann::json j = {{"measurement_id", measurement_id},
                      {"verdict", to_string(annotation.verdict)},
                      {"author", annotation.author},
                      {"note", annotation.note},
                      {"created_at", format_timestamp(annotation.created_at)}};
  return j.dump();
}

// --- CSV ingestion ----------------------------------------------------------

namespace {

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& dir, std::string name, std::vector<std::string_view> header)
      : name_(std::move(name)), width_(header.size()) {
    const auto path = dir / name_;
    in_.open(path, std::ios::binary);
    if (!in_) throw MissingFile(path.string());
    std::string line;
    if (!std::getline(in_, line)) throw MalformedRow(name_ + ":1 (missing header)");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    auto fields = split_csv_record(line);
    if (!fields || fields->size() != header.size() ||
        !std::equal(fields->begin(), fields->end(), header.begin())) {
      throw MalformedRow(name_ + ":1 (unexpected header)");
    }
    line_no_ = 1;
  }

  /// Next non-blank record, or nullopt at end of file.
  std::optional<std::vector<std::string>> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.empty() || line == "\r") continue;
      auto fields = split_csv_record(line);
      if (!fields || fields->size() != width_) fail("wrong field count");
      return fields;
    }
    return std::nullopt;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw MalformedRow(name_ + ":" + std::to_string(line_no_) + " (" + what + ")");
  }

  std::size_t line() const { return line_no_; }

 private:
  std::string name_;
  std::size_t width_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

template <typename T>
T require(const CsvFile& file, std::optional<T> value, const char* what) {
  if (!value) file.fail(std::string("bad ") + what);
  return *value;
}

std::optional<double> optional_number(const CsvFile& file, const std::string& cell, const char* what) {
  if (cell.empty()) return std::nullopt;
  return require(file, parse_double(cell), what);
}

void require_nonempty(const CsvFile& file, const std::string& cell, const char* what) {
  if (cell.empty()) file.fail(std::string("empty ") + what);
}

}  // namespace

Repository ingest_csv(const std::filesystem::path& dir) {
  Repository repo;

  CsvFile circuits(dir, "circuits.csv",
                   {"circuit_id", "circuit_type", "sector", "magnet_position", "manufacturer"});
  CsvFile campaigns(dir, "campaigns.csv", {"campaign_id", "label", "machine_state", "started_at"});
  CsvFile measurements(dir, "measurements.csv",
                       {"measurement_id", "circuit_id", "campaign_id", "test_type", "variant", "operator",
                        "performed_at", "tunnel_temperature_C", "tunnel_humidity_pct"});
  CsvFile samples(dir, "samples.csv", {"measurement_id", "t_s", "voltage_V", "current_A"});

  while (auto row = circuits.next()) {
    auto& f = *row;
    require_nonempty(circuits, f[0], "circuit_id");
    Circuit c{f[0], f[1], require(circuits, parse_sector(f[2]), "sector"), f[3], f[4]};
    try {
      repo.add_circuit(std::move(c));
    } catch (const MalformedRow&) {
      circuits.fail("duplicate circuit_id " + f[0]);
    }
  }

  while (auto row = campaigns.next()) {
    auto& f = *row;
    require_nonempty(campaigns, f[0], "campaign_id");
    Campaign c{f[0], f[1], require(campaigns, parse_machine_state(f[2]), "machine_state"),
               require(campaigns, parse_timestamp(f[3]), "started_at")};
    try {
      repo.add_campaign(std::move(c));
    } catch (const MalformedRow&) {
      campaigns.fail("duplicate campaign_id " + f[0]);
    }
  }

  // Measurements are held back until their samples are attached.
  std::vector<Measurement> pending;
  std::map<std::string, std::size_t, std::less<>> pending_index;
  while (auto row = measurements.next()) {
    auto& f = *row;
    require_nonempty(measurements, f[0], "measurement_id");
    Measurement m;
    m.measurement_id = f[0];
    m.circuit_id = f[1];
    m.campaign_id = f[2];
    m.test_type = require(measurements, parse_test_type(f[3]), "test_type");
    m.variant = require(measurements, parse_variant(f[4]), "variant");
    m.operator_name = f[5];
    m.performed_at = require(measurements, parse_timestamp(f[6]), "performed_at");
    m.tunnel_temperature_C = optional_number(measurements, f[7], "tunnel_temperature_C");
    m.tunnel_humidity_pct = optional_number(measurements, f[8], "tunnel_humidity_pct");
    if (!repo.find_circuit(m.circuit_id)) throw DanglingReference(m.circuit_id);
    if (!repo.find_campaign(m.campaign_id)) throw DanglingReference(m.campaign_id);
    if (!pending_index.emplace(m.measurement_id, pending.size()).second) {
      measurements.fail("duplicate measurement_id " + m.measurement_id);
    }
    pending.push_back(std::move(m));
  }

  while (auto row = samples.next()) {
    auto& f = *row;
    auto it = pending_index.find(f[0]);
    if (it == pending_index.end()) throw DanglingReference(f[0]);
    Sample s;
    s.t_s = require(samples, parse_double(f[1]), "t_s");
    s.voltage_V = optional_number(samples, f[2], "voltage_V");
    s.current_A = optional_number(samples, f[3], "current_A");
    auto& series = pending[it->second].samples;
    if (s.t_s < 0.0 || (!series.empty() && s.t_s <= series.back().t_s)) {
      samples.fail("sample times must be non-negative and strictly increasing");
    }
    series.push_back(s);
  }

  for (Measurement& m : pending) repo.add_measurement(std::move(m));
  return repo;
}

}  // namespace elqa
