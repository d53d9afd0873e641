#include "elqa/cleansing_app.hpp"

#include <algorithm>
#include <cmath>

#include "elqa/error.hpp"
#include "elqa/preprocess.hpp"

namespace elqa {

namespace ids = cleansing_ids;

namespace {

constexpr double kSecondsPerDay = 86400.0;

Value optional_number(const std::optional<double>& v) { return v ? Value(*v) : Value(nullptr); }

Value empty_capacitance_columns() {
  return {{"performed_at", Value::array()},
          {"capacitance_F", Value::array()},
          {"measurement_id", Value::array()},
          {"variant", Value::array()},
          {"suspect", Value::array()}};
}

Value circuit_columns(const std::vector<CircuitRow>& rows) {
  Value cols = {{"circuit_id", Value::array()},
                {"circuit_type", Value::array()},
                {"sector", Value::array()},
                {"n_measurements", Value::array()},
                {"mean_capacitance_F", Value::array()},
                {"std_capacitance_F", Value::array()},
                {"latest_capacitance_F", Value::array()},
                {"trend_slope_F_per_day", Value::array()}};
  for (const CircuitRow& r : rows) {
    cols["circuit_id"].push_back(r.circuit_id);
    cols["circuit_type"].push_back(r.circuit_type);
    cols["sector"].push_back(r.sector);
    cols["n_measurements"].push_back(r.n_measurements);
    cols["mean_capacitance_F"].push_back(optional_number(r.mean_capacitance_F));
    cols["std_capacitance_F"].push_back(optional_number(r.std_capacitance_F));
    cols["latest_capacitance_F"].push_back(optional_number(r.latest_capacitance_F));
    cols["trend_slope_F_per_day"].push_back(optional_number(r.trend_slope_F_per_day));
  }
  return cols;
}

Value capacitance_columns(const CapacitanceSeriesSet& set) {
  Value cols = empty_capacitance_columns();
  for (const CapacitanceSeries& s : set.series) {
    for (const SeriesPoint& p : s.points) {
      cols["performed_at"].push_back(format_timestamp(p.performed_at));
      cols["capacitance_F"].push_back(p.capacitance_F);
      cols["measurement_id"].push_back(p.measurement_id);
      cols["variant"].push_back(to_string(s.variant));
      cols["suspect"].push_back(p.suspect);
    }
  }
  return cols;
}

bool is_test_only(const std::optional<Annotation>& a) { return a && a->verdict == Verdict::test_only; }

std::optional<std::size_t> find_row(const Value& column, const std::string& wanted) {
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (column[i].get_ref<const std::string&>() == wanted) return i;
  }
  return std::nullopt;
}

}  // namespace

// --- CapacitanceIndex -------------------------------------------------------

CapacitanceIndex::CapacitanceIndex(const Repository& repo) {
  MeasurementFilter hvq;
  hvq.test_type = TestType::HVQ;
  for (const Measurement& m : repo.query_measurements(hvq)) {
    Entry e{m.measurement_id, m.variant, m.performed_at, std::nullopt, {}};
    try {
      e.capacitance_F = capacitance(m);
    } catch (const Error& err) {
      e.error = err.code();
    }
    by_circuit_[m.circuit_id].push_back(std::move(e));  // query order is chronological
  }
}

const std::vector<CapacitanceIndex::Entry>& CapacitanceIndex::entries(const std::string& circuit_id) const {
  static const std::vector<Entry> kNone;
  auto it = by_circuit_.find(circuit_id);
  return it == by_circuit_.end() ? kNone : it->second;
}

// --- statistics and series --------------------------------------------------

std::vector<CircuitRow> circuit_stats(const Repository& repo, const std::optional<std::string>& circuit_type) {
  return circuit_stats(CapacitanceIndex(repo), repo, circuit_type);
}

std::vector<CircuitRow> circuit_stats(const CapacitanceIndex& index, const Repository& repo,
                                      const std::optional<std::string>& circuit_type) {
  std::vector<Circuit> circuits = repo.circuits();
  std::sort(circuits.begin(), circuits.end(),
            [](const Circuit& a, const Circuit& b) { return a.circuit_id < b.circuit_id; });

  std::vector<CircuitRow> rows;
  for (const Circuit& c : circuits) {
    if (circuit_type && c.circuit_type != *circuit_type) continue;
    CircuitRow row{c.circuit_id, c.circuit_type, std::string(to_string(c.sector)), 0, {}, {}, {}, {}};

    std::vector<double> values;
    std::vector<double> days;
    std::optional<Timestamp> first;
    for (const auto& e : index.entries(c.circuit_id)) {
      if (!e.capacitance_F || is_test_only(repo.annotation_of(e.measurement_id))) continue;
      if (!first) first = e.performed_at;
      values.push_back(*e.capacitance_F);
      days.push_back(static_cast<double>((e.performed_at - *first).count()) / kSecondsPerDay);
    }
    row.n_measurements = values.size();
    if (!values.empty()) {
      const double mean = basic_stats(values).mean;
      row.mean_capacitance_F = mean;
      row.latest_capacitance_F = values.back();
      if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        row.std_capacitance_F = std::sqrt(ss / static_cast<double>(values.size() - 1));
      }
      if (values.size() >= 3) {
        try {
          row.trend_slope_F_per_day = ols_fit(days, values).slope;
        } catch (const DegenerateTimes&) {
          // all on one instant: no trend
        }
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

CapacitanceSeriesSet capacitance_series(const Repository& repo, const std::string& circuit_id) {
  return capacitance_series(CapacitanceIndex(repo), repo, circuit_id);
}

CapacitanceSeriesSet capacitance_series(const CapacitanceIndex& index, const Repository& repo,
                                        const std::string& circuit_id) {
  if (!repo.find_circuit(circuit_id)) throw UnknownCircuit(circuit_id);
  CapacitanceSeriesSet set;
  for (const auto& e : index.entries(circuit_id)) {
    const auto annotation = repo.annotation_of(e.measurement_id);
    if (is_test_only(annotation)) continue;
    if (!e.capacitance_F) {
      set.warnings.push_back(e.measurement_id + ": " + e.error);
      continue;
    }
    const bool suspect = annotation && annotation->verdict == Verdict::suspect;
    set.series[static_cast<std::size_t>(e.variant)].points.push_back(
        {e.performed_at, *e.capacitance_F, e.measurement_id, suspect});
  }
  return set;
}

std::string activity_link(const std::string& measurement_id, const std::string& url_template) {
  const std::string placeholder = kMeasurementPlaceholder;
  if (url_template.find(placeholder) == std::string::npos) {
    throw BadTemplate("template lacks " + placeholder + ": " + url_template);
  }
  const std::string encoded = percent_encode(measurement_id);
  std::string out;
  std::size_t pos = 0;
  for (std::size_t hit; (hit = url_template.find(placeholder, pos)) != std::string::npos;
       pos = hit + placeholder.size()) {
    out.append(url_template, pos, hit - pos);
    out += encoded;
  }
  out.append(url_template, pos);
  return out;
}

std::shared_ptr<CleansingContext> CleansingContext::make(std::shared_ptr<Repository> repo,
                                                         std::string activity_url_template) {
  activity_link("probe", activity_url_template);  // validates the template
  auto ctx = std::make_shared<CleansingContext>();
  ctx->index = std::make_shared<const CapacitanceIndex>(*repo);
  ctx->repo = std::move(repo);
  ctx->activity_url_template = std::move(activity_url_template);
  ctx->clock = [] { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); };
  return ctx;
}

// --- CleansingDashboard -----------------------------------------------------

CleansingDashboard::CleansingDashboard(std::shared_ptr<const CleansingContext> context)
    : context_(std::move(context)) {}

std::vector<std::string> CleansingDashboard::get_parameter(const std::string& name) const {
  DistinctField field;
  if (name == "circuit_type") {
    field = DistinctField::circuit_type;
  } else if (name == "sector") {
    field = DistinctField::sector;
  } else if (name == "campaign") {
    field = DistinctField::campaign_id;
  } else {
    throw UnknownParameter(name);
  }
  std::vector<std::string> out{kAllOption};
  for (auto& v : context_->repo->distinct_values(field)) out.push_back(std::move(v));
  return out;
}

DataPayload CleansingDashboard::get_data(const DataFilters& filters) const {
  std::optional<std::string> type;
  if (auto it = filters.find("circuit_type"); it != filters.end() && it->second != kAllOption) type = it->second;

  DataPayload out;
  out[ids::kCircuitsSource] = {{"data", circuit_columns(circuit_stats(*context_->index, *context_->repo, type))}};
  if (auto it = filters.find("circuit_id"); it != filters.end() && !it->second.empty()) {
    const auto set = capacitance_series(*context_->index, *context_->repo, it->second);
    out[ids::kCapacitanceSource] = {{"data", capacitance_columns(set)}, {"warnings", set.warnings}};
  } else {
    out[ids::kCapacitanceSource] = {{"data", empty_capacitance_columns()}, {"warnings", Value::array()}};
  }
  return out;
}

void CleansingDashboard::do_create(Document& doc) {
  auto add = [&doc](const char* id, ModelKind kind, std::map<std::string, Value> props) {
    doc.models.emplace(id, ModelNode{id, kind, std::move(props)});
  };
  Value types = get_parameter("circuit_type");
  const DataPayload initial = get_data({});

  add(ids::kTypeSelect, ModelKind::select_box,
      {{"title", "Circuit type"}, {"options", types}, {"value", kAllOption}});
  add(ids::kCircuitsSource, ModelKind::column_data_source,
      {{"data", initial.at(ids::kCircuitsSource).at("data")}, {"selected_indices", Value::array()}});
  add(ids::kCircuitsTable, ModelKind::data_table,
      {{"title", "Circuits"},
       {"source", ids::kCircuitsSource},
       {"columns",
        {"circuit_id", "circuit_type", "sector", "n_measurements", "mean_capacitance_F", "std_capacitance_F",
         "latest_capacitance_F", "trend_slope_F_per_day"}}});
  add(ids::kCapacitanceSource, ModelKind::column_data_source,
      {{"data", initial.at(ids::kCapacitanceSource).at("data")},
       {"selected_indices", Value::array()},
       {"warnings", Value::array()}});
  add(ids::kCapacitancePlot, ModelKind::scatter_plot,
      {{"title", "Capacitance"},
       {"source", ids::kCapacitanceSource},
       {"x", "performed_at"},
       {"y", "capacitance_F"},
       {"series_key", "variant"},
       {"series", {"M1", "M2"}},
       {"tapped_index", nullptr}});
  add(ids::kTapTool, ModelKind::tap_tool,
      {{"target", ids::kCapacitancePlot}, {"url_template", context_->activity_url_template}, {"last_url", ""}});
  add(ids::kDetailPanel, ModelKind::detail_panel, {{"measurement_id", ""}, {"fields", Value::object()}});
  add(ids::kVerdictSelect, ModelKind::select_box,
      {{"title", "Verdict"}, {"options", {"assured", "test_only", "suspect"}}, {"value", ""}});

  auto leaf = [](const char* id) { return LayoutNode{id, "", {}}; };
  doc.layout = LayoutNode{
      "",
      "column",
      {LayoutNode{"", "row", {leaf(ids::kTypeSelect), leaf(ids::kVerdictSelect)}},
       LayoutNode{"",
                  "row",
                  {leaf(ids::kCircuitsTable),
                   LayoutNode{"", "column",
                              {leaf(ids::kCapacitancePlot), leaf(ids::kTapTool), leaf(ids::kDetailPanel)}}}}}};
}

void CleansingDashboard::do_setup_events() {
  register_handler(ids::kTypeSelect, EventKind::value_change, [this](const Value& p) { on_type_change(p); });
  register_handler(ids::kCircuitsTable, EventKind::select, [this](const Value& p) { on_table_select(p); });
  register_handler(ids::kCapacitanceSource, EventKind::select, [this](const Value& p) { on_point_select(p); });
  register_handler(ids::kCapacitancePlot, EventKind::tap, [this](const Value& p) { on_tap(p); });
  register_handler(ids::kVerdictSelect, EventKind::value_change, [this](const Value& p) { on_verdict(p); });
}

std::optional<std::string> CleansingDashboard::active_type() const {
  const auto& value = property(ids::kTypeSelect, "value").get_ref<const std::string&>();
  if (value.empty() || value == kAllOption) return std::nullopt;
  return value;
}

std::optional<std::string> CleansingDashboard::selected_circuit() const {
  const Value& selected = property(ids::kCircuitsSource, "selected_indices");
  if (selected.empty()) return std::nullopt;
  return property(ids::kCircuitsSource, "data").at("circuit_id").at(selected[0].get<std::size_t>()).get<std::string>();
}

std::optional<std::string> CleansingDashboard::selected_measurement() const {
  const auto& id = property(ids::kDetailPanel, "measurement_id").get_ref<const std::string&>();
  if (id.empty()) return std::nullopt;
  return id;
}

std::size_t CleansingDashboard::capacitance_rows() const {
  return property(ids::kCapacitanceSource, "data").at("measurement_id").size();
}

std::size_t CleansingDashboard::index_payload(const Value& payload, std::size_t rows) const {
  if (!payload.is_number_integer() || payload.get<long long>() < 0 ||
      payload.get<unsigned long long>() >= rows) {
    throw InvalidPayload("expected a row index below " + std::to_string(rows));
  }
  return payload.get<std::size_t>();
}

void CleansingDashboard::refresh_circuits(const std::optional<std::string>& keep_circuit) {
  DataFilters filters;
  if (auto type = active_type()) filters["circuit_type"] = *type;
  const Value data = get_data(filters).at(ids::kCircuitsSource).at("data");
  Value selected = Value::array();
  if (keep_circuit) {
    if (auto row = find_row(data.at("circuit_id"), *keep_circuit)) selected.push_back(*row);
  }
  set_property(ids::kCircuitsSource, "data", data);
  set_property(ids::kCircuitsSource, "selected_indices", std::move(selected));
}

void CleansingDashboard::refresh_capacitance(const std::optional<std::string>& keep_measurement) {
  std::optional<std::string> tapped;
  const Value& tapped_index = property(ids::kCapacitancePlot, "tapped_index");
  if (!tapped_index.is_null()) {
    tapped = property(ids::kCapacitanceSource, "data")
                 .at("measurement_id")
                 .at(tapped_index.get<std::size_t>())
                 .get<std::string>();
  }

  DataFilters filters;
  if (auto circuit = selected_circuit()) filters["circuit_id"] = *circuit;
  const Value payload = get_data(filters).at(ids::kCapacitanceSource);
  const Value& ids_column = payload.at("data").at("measurement_id");

  Value selected = Value::array();
  if (keep_measurement) {
    if (auto row = find_row(ids_column, *keep_measurement)) selected.push_back(*row);
  }
  Value new_tapped = nullptr;
  if (tapped && keep_measurement && *tapped == *keep_measurement) {
    if (auto row = find_row(ids_column, *tapped)) new_tapped = *row;
  }
  set_property(ids::kCapacitanceSource, "data", payload.at("data"));
  set_property(ids::kCapacitanceSource, "warnings", payload.at("warnings"));
  set_property(ids::kCapacitanceSource, "selected_indices", std::move(selected));
  set_property(ids::kCapacitancePlot, "tapped_index", std::move(new_tapped));
}

void CleansingDashboard::show_measurement(const std::optional<std::string>& measurement_id) {
  if (!measurement_id) {
    set_property(ids::kDetailPanel, "measurement_id", "");
    set_property(ids::kDetailPanel, "fields", Value::object());
    return;
  }
  const auto m = context_->repo->find_measurement(*measurement_id);
  if (!m) throw UnknownMeasurement(*measurement_id);
  const auto campaign = context_->repo->find_campaign(m->campaign_id);

  Value fields = {{"circuit_id", m->circuit_id},
                  {"campaign_id", m->campaign_id},
                  {"test_type", to_string(m->test_type)},
                  {"variant", to_string(m->variant)},
                  {"operator", m->operator_name},
                  {"performed_at", format_timestamp(m->performed_at)},
                  {"tunnel_temperature_C", optional_number(m->tunnel_temperature_C)},
                  {"tunnel_humidity_pct", optional_number(m->tunnel_humidity_pct)},
                  {"activity_url", activity_link(m->measurement_id, context_->activity_url_template)}};
  if (campaign) {
    fields["campaign_label"] = campaign->label;
    fields["machine_state"] = to_string(campaign->machine_state);
  }
  for (const auto& e : context_->index->entries(m->circuit_id)) {
    if (e.measurement_id == m->measurement_id) fields["capacitance_F"] = optional_number(e.capacitance_F);
  }
  if (m->annotation) {
    fields["verdict"] = to_string(m->annotation->verdict);
    fields["verdict_author"] = m->annotation->author;
    fields["verdict_note"] = m->annotation->note;
  } else {
    fields["verdict"] = nullptr;
  }
  set_property(ids::kDetailPanel, "measurement_id", *measurement_id);
  set_property(ids::kDetailPanel, "fields", std::move(fields));
}

void CleansingDashboard::on_type_change(const Value& payload) {
  if (!payload.is_string()) throw InvalidPayload("type_select expects a string value");
  const auto& options = property(ids::kTypeSelect, "options");
  if (std::find(options.begin(), options.end(), payload) == options.end()) {
    throw InvalidPayload("unknown circuit type " + payload.get<std::string>());
  }
  set_property(ids::kTypeSelect, "value", payload);
  refresh_circuits(std::nullopt);
  refresh_capacitance(std::nullopt);
  show_measurement(std::nullopt);
  set_property(ids::kTapTool, "last_url", "");
}

void CleansingDashboard::on_table_select(const Value& payload) {
  if (!payload.is_array() || payload.size() > 1) {
    throw InvalidPayload("circuits_table expects [] or [row]");
  }
  const std::size_t rows = property(ids::kCircuitsSource, "data").at("circuit_id").size();
  Value selected = Value::array();
  if (!payload.empty()) selected.push_back(index_payload(payload[0], rows));
  set_property(ids::kCircuitsSource, "selected_indices", std::move(selected));
  set_property(ids::kCapacitancePlot, "tapped_index", nullptr);
  refresh_capacitance(std::nullopt);
  show_measurement(std::nullopt);
  set_property(ids::kTapTool, "last_url", "");
}

void CleansingDashboard::on_point_select(const Value& payload) {
  if (!payload.is_array() || payload.size() > 1) {
    throw InvalidPayload("capacitance_source expects [] or [row]");
  }
  Value selected = Value::array();
  std::optional<std::string> measurement;
  if (!payload.empty()) {
    const std::size_t row = index_payload(payload[0], capacitance_rows());
    selected.push_back(row);
    measurement = property(ids::kCapacitanceSource, "data").at("measurement_id").at(row).get<std::string>();
  }
  set_property(ids::kCapacitanceSource, "selected_indices", std::move(selected));
  show_measurement(measurement);
}

void CleansingDashboard::on_tap(const Value& payload) {
  const std::size_t row = index_payload(payload, capacitance_rows());
  const std::string measurement =
      property(ids::kCapacitanceSource, "data").at("measurement_id").at(row).get<std::string>();
  set_property(ids::kCapacitancePlot, "tapped_index", row);
  set_property(ids::kCapacitanceSource, "selected_indices", Value::array({row}));
  show_measurement(measurement);
  set_property(ids::kTapTool, "last_url", activity_link(measurement, context_->activity_url_template));
}

void CleansingDashboard::on_verdict(const Value& payload) {
  std::string measurement_id;
  std::string verdict_name;
  std::string note;
  std::string author = "anonymous";
  if (payload.is_string()) {
    const auto selected = selected_measurement();
    if (!selected) throw InvalidPayload("no measurement selected");
    measurement_id = *selected;
    verdict_name = payload.get<std::string>();
  } else if (payload.is_object()) {
    auto text = [&payload](const char* key, bool required) -> std::optional<std::string> {
      auto it = payload.find(key);
      if (it == payload.end()) {
        if (required) throw InvalidPayload(std::string("verdict payload lacks ") + key);
        return std::nullopt;
      }
      if (!it->is_string()) throw InvalidPayload(std::string(key) + " must be a string");
      return it->get<std::string>();
    };
    measurement_id = *text("measurement_id", true);
    verdict_name = *text("verdict", true);
    note = text("note", false).value_or("");
    author = text("author", false).value_or(author);
  } else {
    throw InvalidPayload("verdict expects a verdict name or {measurement_id, verdict, note}");
  }
  const auto verdict = parse_verdict(verdict_name);
  if (!verdict) throw InvalidPayload("unknown verdict " + verdict_name);

  const auto keep_circuit = selected_circuit();
  const auto keep_measurement = selected_measurement();
  context_->repo->annotate(measurement_id, Annotation{*verdict, author, note, context_->clock()});

  set_property(ids::kVerdictSelect, "value", verdict_name);
  refresh_circuits(keep_circuit);
  refresh_capacitance(keep_measurement);
  const bool still_shown = !property(ids::kCapacitanceSource, "selected_indices").empty();
  show_measurement(still_shown ? keep_measurement : std::nullopt);
  if (!still_shown) set_property(ids::kTapTool, "last_url", "");
}

Patch CleansingDashboard::apply_verdict(const std::string& measurement_id, Verdict verdict,
                                        const std::string& author, const std::string& note) {
  const Value payload = {
      {"measurement_id", measurement_id}, {"verdict", to_string(verdict)}, {"author", author}, {"note", note}};
  return input_change(UiEvent{ids::kVerdictSelect, EventKind::value_change, payload});
}

std::unique_ptr<CleansingDashboard> build_cleansing_dashboard(std::shared_ptr<const CleansingContext> context) {
  auto dashboard = std::make_unique<CleansingDashboard>(std::move(context));
  dashboard->create();
  dashboard->setup_events();
  return dashboard;
}

}  // namespace elqa
