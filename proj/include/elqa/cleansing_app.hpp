#pragma once

// Reference dashboard for cleansing capacitance data: filter circuits by
// type, tabulate per-circuit statistics, plot the capacitance history of the
// selected circuit (one series per measurement variant), tap through to the
// activity page of a measurement, and record verdicts.

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "elqa/dashboard.hpp"
#include "elqa/signal_store.hpp"

namespace elqa {

/// Model ids of the cleansing document.
namespace cleansing_ids {
inline constexpr const char* kTypeSelect = "type_select";
inline constexpr const char* kCircuitsSource = "circuits_source";
inline constexpr const char* kCircuitsTable = "circuits_table";
inline constexpr const char* kCapacitanceSource = "capacitance_source";
inline constexpr const char* kCapacitancePlot = "capacitance_plot";
inline constexpr const char* kTapTool = "tap_tool";
inline constexpr const char* kDetailPanel = "detail_panel";
inline constexpr const char* kVerdictSelect = "verdict_select";
}  // namespace cleansing_ids

/// Select-box option that disables a filter.
inline constexpr const char* kAllOption = "(all)";
inline constexpr const char* kMeasurementPlaceholder = "{measurement_id}";

struct CircuitRow {
  std::string circuit_id;
  std::string circuit_type;
  std::string sector;
  std::size_t n_measurements = 0;  // values behind the statistics
  std::optional<double> mean_capacitance_F;
  std::optional<double> std_capacitance_F;     // sample std, needs >= 2
  std::optional<double> latest_capacitance_F;
  std::optional<double> trend_slope_F_per_day;  // needs >= 3

  bool operator==(const CircuitRow&) const = default;
};

struct SeriesPoint {
  Timestamp performed_at{};
  double capacitance_F = 0.0;
  std::string measurement_id;
  bool suspect = false;

  bool operator==(const SeriesPoint&) const = default;
};

struct CapacitanceSeries {
  Variant variant = Variant::M1;
  std::vector<SeriesPoint> points;  // chronological

  bool operator==(const CapacitanceSeries&) const = default;
};

struct CapacitanceSeriesSet {
  std::array<CapacitanceSeries, 2> series{CapacitanceSeries{Variant::M1, {}}, CapacitanceSeries{Variant::M2, {}}};
  /// "<measurement_id>: <error code>" for HVQ measurements whose capacitance
  /// could not be computed.
  std::vector<std::string> warnings;

  bool operator==(const CapacitanceSeriesSet&) const = default;
};

/// Capacitance of every HVQ measurement, computed once. Signals never change
/// after ingestion; annotations are read live from the repository.
class CapacitanceIndex {
 public:
  struct Entry {
    std::string measurement_id;
    Variant variant = Variant::M1;
    Timestamp performed_at{};
    std::optional<double> capacitance_F;
    std::string error;  // error code when capacitance_F is absent
  };

  explicit CapacitanceIndex(const Repository& repo);

  /// Chronological (performed_at, then id); empty for unknown circuits.
  const std::vector<Entry>& entries(const std::string& circuit_id) const;

 private:
  std::map<std::string, std::vector<Entry>, std::less<>> by_circuit_;
};

std::vector<CircuitRow> circuit_stats(const Repository& repo, const std::optional<std::string>& circuit_type);
std::vector<CircuitRow> circuit_stats(const CapacitanceIndex& index, const Repository& repo,
                                      const std::optional<std::string>& circuit_type);

/// Throws UnknownCircuit.
CapacitanceSeriesSet capacitance_series(const Repository& repo, const std::string& circuit_id);
CapacitanceSeriesSet capacitance_series(const CapacitanceIndex& index, const Repository& repo,
                                        const std::string& circuit_id);

/// Substitutes the percent-encoded id for every `{measurement_id}`.
/// Throws BadTemplate when the placeholder is missing.
std::string activity_link(const std::string& measurement_id, const std::string& url_template);

/// State shared by every session of the cleansing dashboard.
struct CleansingContext {
  std::shared_ptr<Repository> repo;
  std::shared_ptr<const CapacitanceIndex> index;
  std::string activity_url_template;
  std::function<Timestamp()> clock;

  /// Throws BadTemplate.
  static std::shared_ptr<CleansingContext> make(std::shared_ptr<Repository> repo, std::string activity_url_template);
};

class CleansingDashboard : public Dashboard {
 public:
  explicit CleansingDashboard(std::shared_ptr<const CleansingContext> context);

  /// Filters: "circuit_type" (absent or "(all)" = every circuit) and
  /// "circuit_id" (capacitance series of that circuit). Returns, per data
  /// source, the object `{"data": columns, ...}` of its refreshed properties.
  DataPayload get_data(const DataFilters& filters) const override;

  /// "circuit_type", "sector" or "campaign"; "(all)" followed by the
  /// distinct values. Throws UnknownParameter.
  std::vector<std::string> get_parameter(const std::string& name) const override;

  /// Records a verdict through the verdict select box, as a client would.
  Patch apply_verdict(const std::string& measurement_id, Verdict verdict, const std::string& author,
                      const std::string& note);

  std::optional<std::string> selected_circuit() const;
  std::optional<std::string> selected_measurement() const;

 protected:
  void do_create(Document& doc) override;
  void do_setup_events() override;

 private:
  void on_type_change(const Value& payload);
  void on_table_select(const Value& payload);
  void on_point_select(const Value& payload);
  void on_tap(const Value& payload);
  void on_verdict(const Value& payload);

  std::optional<std::string> active_type() const;
  void refresh_circuits(const std::optional<std::string>& keep_circuit);
  void refresh_capacitance(const std::optional<std::string>& keep_measurement);
  void show_measurement(const std::optional<std::string>& measurement_id);
  std::size_t capacitance_rows() const;
  std::size_t index_payload(const Value& payload, std::size_t rows) const;

  std::shared_ptr<const CleansingContext> context_;
};

/// Builds, populates and wires a dashboard (create + setup_events).
std::unique_ptr<CleansingDashboard> build_cleansing_dashboard(std::shared_ptr<const CleansingContext> context);

}  // namespace elqa
