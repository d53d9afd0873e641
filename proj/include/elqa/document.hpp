#pragma once

// Server-held widget state: a document of typed model nodes, the patches
// that move it from one revision to the next, and the client events that
// trigger them. The JSON forms defined here are the wire schema.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace elqa {

using Value = nlohmann::json;

enum class ModelKind {
  select_box,
  data_table,
  line_plot,
  scatter_plot,
  column_data_source,
  tap_tool,
  detail_panel,
};

enum class EventKind { value_change, select, tap };

std::string_view to_string(ModelKind kind);
std::string_view to_string(EventKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view s);
std::optional<EventKind> parse_event_kind(std::string_view s);

/// value_change -> select_box; select -> column_data_source, data_table;
/// tap -> line_plot, scatter_plot.
bool event_applies_to(EventKind event, ModelKind kind);

struct ModelNode {
  std::string model_id;
  ModelKind kind = ModelKind::detail_panel;
  std::map<std::string, Value> properties;

  bool operator==(const ModelNode&) const = default;
};

/// Leaves name a model; containers carry a direction ("row" or "column").
struct LayoutNode {
  std::string model_id;
  std::string direction;
  std::vector<LayoutNode> children;

  bool operator==(const LayoutNode&) const = default;
};

struct Document {
  std::map<std::string, ModelNode> models;
  LayoutNode layout;
  std::uint64_t revision = 0;

  /// Throws UnknownModel.
  const ModelNode& model(const std::string& model_id) const;
  /// Throws UnknownModel, or SchemaViolation if the property is absent.
  const Value& property(const std::string& model_id, const std::string& name) const;

  bool operator==(const Document&) const = default;
};

struct PatchOp {
  std::string model_id;
  std::string property;
  Value value;

  bool operator==(const PatchOp&) const = default;
};

struct Patch {
  std::uint64_t revision = 0;
  std::vector<PatchOp> ops;

  bool operator==(const Patch&) const = default;
};

struct UiEvent {
  std::string model_id;
  EventKind event = EventKind::value_change;
  Value payload;
};

/// Checks the per-kind property schema of one node, including references to
/// other models. Throws SchemaViolation.
///
///   select_box          options: [string], value: string in options or "", title?: string
///   column_data_source  data: {column: [..]} equal lengths, selected_indices: [int] valid rows,
///                       warnings?: [string]
///   data_table          source: column_data_source id, columns: [string]
///   line/scatter_plot   source: column_data_source id, x: string, y: string,
///                       tapped_index: int or null, title?, series_key?: string, series?: [string]
///   tap_tool            target: plot id, url_template: string, last_url: string
///   detail_panel        measurement_id: string, fields: object
void validate_node(const ModelNode& node, const Document& doc);

/// Validates every node and that the layout only names existing models.
void validate_document(const Document& doc);

/// Requires patch.revision == doc.revision + 1 (RevisionGap otherwise);
/// throws UnknownModel and SchemaViolation. The input is left untouched on
/// failure.
Document apply_patch(const Document& doc, const Patch& patch);

/// Canonical form: `{"layout":..,"models":{id:{"kind":..,"properties":{..}}},"revision":N}`
/// with every object's keys sorted.
Value serialize_document(const Document& doc);
std::string canonical_document_text(const Document& doc);
/// Throws SchemaViolation on a malformed payload.
Document deserialize_document(const Value& payload);

/// `{"kind":"patch","revision":N,"ops":[{"model":..,"prop":..,"value":..}]}`
Value patch_to_json(const Patch& patch);
/// Throws MalformedMessage.
Patch patch_from_json(const Value& message);

/// `{"kind":"event","model":..,"event":..,"payload":..}`
Value event_to_json(const UiEvent& event);
/// Throws MalformedMessage.
UiEvent event_from_json(const Value& message);

Value error_message(std::string_view code, std::string_view detail);
Value close_message(std::string_view reason);

}  // namespace elqa
