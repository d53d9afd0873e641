#include "elqa/document.hpp"

#include <array>
#include <set>

#include "elqa/error.hpp"

namespace elqa {

namespace {

constexpr std::array<std::string_view, 7> kModelKindNames{
    "select_box", "data_table", "line_plot", "scatter_plot", "column_data_source", "tap_tool", "detail_panel"};
constexpr std::array<std::string_view, 3> kEventKindNames{"value_change", "select", "tap"};

enum class Type { string, string_list, index_list, object, column_map, index_or_null };

struct PropertyRule {
  std::string_view name;
  Type type;
  bool required;
};

std::vector<PropertyRule> rules_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::select_box:
      return {{"options", Type::string_list, true}, {"value", Type::string, true}, {"title", Type::string, false}};
    case ModelKind::column_data_source:
      return {{"data", Type::column_map, true},
              {"selected_indices", Type::index_list, true},
              {"warnings", Type::string_list, false}};
    case ModelKind::data_table:
      return {{"source", Type::string, true}, {"columns", Type::string_list, true}, {"title", Type::string, false}};
    case ModelKind::line_plot:
    case ModelKind::scatter_plot:
      return {{"source", Type::string, true},       {"x", Type::string, true},
              {"y", Type::string, true},            {"tapped_index", Type::index_or_null, true},
              {"title", Type::string, false},       {"series_key", Type::string, false},
              {"series", Type::string_list, false}};
    case ModelKind::tap_tool:
      return {{"target", Type::string, true}, {"url_template", Type::string, true}, {"last_url", Type::string, true}};
    case ModelKind::detail_panel:
      return {{"measurement_id", Type::string, true}, {"fields", Type::object, true}};
  }
  return {};
}

[[noreturn]] void violation(const ModelNode& node, const std::string& what) {
  throw SchemaViolation(node.model_id + ": " + what);
}

bool is_index(const Value& v) { return v.is_number_integer() && v.get<long long>() >= 0; }

bool has_type(const Value& v, Type type) {
  switch (type) {
    case Type::string:
      return v.is_string();
    case Type::string_list:
      if (!v.is_array()) return false;
      for (const auto& e : v) {
        if (!e.is_string()) return false;
      }
      return true;
    case Type::index_list:
      if (!v.is_array()) return false;
      for (const auto& e : v) {
        if (!is_index(e)) return false;
      }
      return true;
    case Type::object:
      return v.is_object();
    case Type::column_map:
      if (!v.is_object()) return false;
      for (const auto& [name, column] : v.items()) {
        if (!column.is_array()) return false;
      }
      return true;
    case Type::index_or_null:
      return v.is_null() || is_index(v);
  }
  return false;
}

std::size_t column_length(const ModelNode& node) {
  const Value& data = node.properties.at("data");
  std::optional<std::size_t> length;
  for (const auto& [name, column] : data.items()) {
    if (length && column.size() != *length) violation(node, "column " + name + " length differs");
    length = column.size();
  }
  return length.value_or(0);
}

void require_reference(const ModelNode& node, const Document& doc, const std::string& prop,
                       std::initializer_list<ModelKind> kinds) {
  const std::string& target = node.properties.at(prop).get_ref<const std::string&>();
  auto it = doc.models.find(target);
  if (it == doc.models.end()) violation(node, prop + " references unknown model " + target);
  for (ModelKind k : kinds) {
    if (it->second.kind == k) return;
  }
  violation(node, prop + " references a model of the wrong kind");
}

void validate_layout(const LayoutNode& layout, const Document& doc) {
  if (!layout.model_id.empty() && !doc.models.contains(layout.model_id)) {
    throw SchemaViolation("layout references unknown model " + layout.model_id);
  }
  for (const auto& child : layout.children) validate_layout(child, doc);
}

Value layout_to_json(const LayoutNode& layout) {
  Value children = Value::array();
  for (const auto& c : layout.children) children.push_back(layout_to_json(c));
  return {{"model", layout.model_id}, {"direction", layout.direction}, {"children", std::move(children)}};
}

LayoutNode layout_from_json(const Value& j) {
  if (!j.is_object()) throw SchemaViolation("layout node must be an object");
  LayoutNode node;
  try {
    node.model_id = j.at("model").get<std::string>();
    node.direction = j.at("direction").get<std::string>();
    for (const auto& c : j.at("children")) node.children.push_back(layout_from_json(c));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(std::string("layout: ") + e.what());
  }
  return node;
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kModelKindNames[static_cast<std::size_t>(kind)]; }
std::string_view to_string(EventKind kind) { return kEventKindNames[static_cast<std::size_t>(kind)]; }

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (std::size_t i = 0; i < kModelKindNames.size(); ++i) {
    if (kModelKindNames[i] == s) return static_cast<ModelKind>(i);
  }
  return std::nullopt;
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (std::size_t i = 0; i < kEventKindNames.size(); ++i) {
    if (kEventKindNames[i] == s) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

bool event_applies_to(EventKind event, ModelKind kind) {
  switch (event) {
    case EventKind::value_change:
      return kind == ModelKind::select_box;
    case EventKind::select:
      return kind == ModelKind::column_data_source || kind == ModelKind::data_table;
    case EventKind::tap:
      return kind == ModelKind::line_plot || kind == ModelKind::scatter_plot;
  }
  return false;
}

const ModelNode& Document::model(const std::string& model_id) const {
  auto it = models.find(model_id);
  if (it == models.end()) throw UnknownModel(model_id);
  return it->second;
}

const Value& Document::property(const std::string& model_id, const std::string& name) const {
  const ModelNode& node = model(model_id);
  auto it = node.properties.find(name);
  if (it == node.properties.end()) throw SchemaViolation(model_id + " has no property " + name);
  return it->second;
}

void validate_node(const ModelNode& node, const Document& doc) {
  const auto rules = rules_for(node.kind);
  for (const auto& rule : rules) {
    auto it = node.properties.find(std::string(rule.name));
    if (it == node.properties.end()) {
      if (rule.required) violation(node, "missing property " + std::string(rule.name));
      continue;
    }
    if (!has_type(it->second, rule.type)) violation(node, "property " + std::string(rule.name) + " has wrong type");
  }
  for (const auto& [name, value] : node.properties) {
    bool known = false;
    for (const auto& rule : rules) known = known || rule.name == name;
    if (!known) violation(node, "unknown property " + name);
  }

  switch (node.kind) {
    case ModelKind::select_box: {
      const auto& value = node.properties.at("value").get_ref<const std::string&>();
      if (value.empty()) break;
      bool found = false;
      for (const auto& o : node.properties.at("options")) found = found || o.get_ref<const std::string&>() == value;
      if (!found) violation(node, "value '" + value + "' is not an option");
      break;
    }
    case ModelKind::column_data_source: {
      const std::size_t rows = column_length(node);
      std::set<long long> seen;
      for (const auto& i : node.properties.at("selected_indices")) {
        const auto idx = i.get<long long>();
        if (static_cast<std::size_t>(idx) >= rows) violation(node, "selected index out of range");
        if (!seen.insert(idx).second) violation(node, "duplicate selected index");
      }
      break;
    }
    case ModelKind::data_table:
      require_reference(node, doc, "source", {ModelKind::column_data_source});
      break;
    case ModelKind::line_plot:
    case ModelKind::scatter_plot: {
      require_reference(node, doc, "source", {ModelKind::column_data_source});
      const Value& tapped = node.properties.at("tapped_index");
      if (!tapped.is_null()) {
        const auto& source = doc.models.at(node.properties.at("source").get<std::string>());
        if (tapped.get<std::size_t>() >= column_length(source)) violation(node, "tapped_index out of range");
      }
      break;
    }
    case ModelKind::tap_tool:
      require_reference(node, doc, "target", {ModelKind::line_plot, ModelKind::scatter_plot});
      break;
    case ModelKind::detail_panel:
      break;
  }
}

void validate_document(const Document& doc) {
  for (const auto& [id, node] : doc.models) {
    if (id != node.model_id) throw SchemaViolation("model key " + id + " differs from model_id " + node.model_id);
    validate_node(node, doc);
  }
  validate_layout(doc.layout, doc);
}

Document apply_patch(const Document& doc, const Patch& patch) {
  if (patch.revision != doc.revision + 1) {
    throw RevisionGap("document at revision " + std::to_string(doc.revision) + ", patch carries " +
                      std::to_string(patch.revision));
  }
  if (patch.ops.empty()) throw SchemaViolation("patch has no ops");
  Document next = doc;
  for (const PatchOp& op : patch.ops) {
    auto it = next.models.find(op.model_id);
    if (it == next.models.end()) throw UnknownModel(op.model_id);
    it->second.properties[op.property] = op.value;
  }
  // Cross-node references (e.g. a plot's tapped_index into its source) mean
  // every node is re-checked, not just the touched ones.
  validate_document(next);
  next.revision = patch.revision;
  return next;
}

Value serialize_document(const Document& doc) {
  Value models = Value::object();
  for (const auto& [id, node] : doc.models) {
    Value props = Value::object();
    for (const auto& [name, value] : node.properties) props[name] = value;
    models[id] = {{"kind", to_string(node.kind)}, {"properties", std::move(props)}};
  }
  return {{"revision", doc.revision}, {"layout", layout_to_json(doc.layout)}, {"models", std::move(models)}};
}

std::string canonical_document_text(const Document& doc) { return serialize_document(doc).dump(); }

Document deserialize_document(const Value& payload) {
  if (!payload.is_object()) throw SchemaViolation("document payload must be an object");
  Document doc;
  try {
    if (!payload.at("revision").is_number_unsigned()) throw SchemaViolation("revision must be a counter");
    doc.revision = payload.at("revision").get<std::uint64_t>();
    doc.layout = layout_from_json(payload.at("layout"));
    for (const auto& [id, j] : payload.at("models").items()) {
      ModelNode node;
      node.model_id = id;
      const auto kind = parse_model_kind(j.at("kind").get<std::string>());
      if (!kind) throw SchemaViolation(id + ": unknown kind");
      node.kind = *kind;
      for (const auto& [name, value] : j.at("properties").items()) node.properties[name] = value;
      doc.models.emplace(id, std::move(node));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(std::string("document payload: ") + e.what());
  }
  validate_document(doc);
  return doc;
}

Value patch_to_json(const Patch& patch) {
  Value ops = Value::array();
  for (const auto& op : patch.ops) ops.push_back({{"model", op.model_id}, {"prop", op.property}, {"value", op.value}});
  return {{"kind", "patch"}, {"revision", patch.revision}, {"ops", std::move(ops)}};
}

Patch patch_from_json(const Value& message) {
  try {
    if (!message.is_object() || message.at("kind") != "patch") throw MalformedMessage("not a patch message");
    if (!message.at("revision").is_number_unsigned()) throw MalformedMessage("revision must be a counter");
    if (!message.at("ops").is_array()) throw MalformedMessage("ops must be an array");
    Patch patch;
    patch.revision = message.at("revision").get<std::uint64_t>();
    for (const auto& op : message.at("ops")) {
      patch.ops.push_back({op.at("model").get<std::string>(), op.at("prop").get<std::string>(), op.at("value")});
    }
    return patch;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedMessage(e.what());
  }
}

Value event_to_json(const UiEvent& event) {
  return {{"kind", "event"}, {"model", event.model_id}, {"event", to_string(event.event)}, {"payload", event.payload}};
}

UiEvent event_from_json(const Value& message) {
  if (!message.is_object()) throw MalformedMessage("message must be a JSON object");
  auto kind = message.find("kind");
  if (kind == message.end() || *kind != "event") throw MalformedMessage("expected kind \"event\"");
  auto model = message.find("model");
  if (model == message.end() || !model->is_string()) throw MalformedMessage("model must be a string");
  auto event = message.find("event");
  if (event == message.end() || !event->is_string()) throw MalformedMessage("event must be a string");
  const auto event_kind = parse_event_kind(event->get<std::string>());
  if (!event_kind) throw MalformedMessage("unknown event " + event->get<std::string>());
  auto payload = message.find("payload");
  if (payload == message.end()) throw MalformedMessage("payload missing");
  return {model->get<std::string>(), *event_kind, *payload};
}

Value error_message(std::string_view code, std::string_view detail) {
  return {{"kind", "error"}, {"code", code}, {"detail", detail}};
}

Value close_message(std::string_view reason) { return {{"kind", "close"}, {"reason", reason}}; }

}  // namespace elqa
