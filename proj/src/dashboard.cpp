#include "elqa/dashboard.hpp"

#include <algorithm>

#include "elqa/error.hpp"

namespace elqa {

void Dashboard::create() {
  Document doc;
  do_create(doc);
  validate_document(doc);
  doc_ = std::move(doc);
  handlers_.clear();
}

void Dashboard::setup_events() { do_setup_events(); }

bool Dashboard::has_handler(const std::string& model_id, EventKind event) const {
  return handlers_.contains({model_id, event});
}

std::vector<std::pair<std::string, EventKind>> Dashboard::registered_events() const {
  std::vector<std::pair<std::string, EventKind>> out;
  for (const auto& [key, handler] : handlers_) out.push_back(key);
  return out;
}

void Dashboard::register_handler(const std::string& model_id, EventKind event, Handler handler) {
  const ModelNode& node = doc_.model(model_id);
  if (!event_applies_to(event, node.kind)) {
    throw SchemaViolation(std::string(to_string(event)) + " does not apply to " + std::string(to_string(node.kind)));
  }
  if (!handlers_.emplace(std::pair{model_id, event}, std::move(handler)).second) {
    throw DuplicateRegistration(model_id + "/" + std::string(to_string(event)));
  }
}

void Dashboard::set_property(const std::string& model_id, const std::string& name, Value value) {
  auto it = doc_.models.find(model_id);
  if (it == doc_.models.end()) throw UnknownModel(model_id);
  it->second.properties[name] = std::move(value);
  if (in_handler_) {
    std::pair key{model_id, name};
    if (std::find(touched_.begin(), touched_.end(), key) == touched_.end()) touched_.push_back(std::move(key));
  }
}

const Value& Dashboard::property(const std::string& model_id, const std::string& name) const {
  return doc_.property(model_id, name);
}

Patch Dashboard::input_change(const UiEvent& event) {
  auto it = handlers_.find({event.model_id, event.event});
  if (it == handlers_.end()) throw NoHandler(event.model_id + "/" + std::string(to_string(event.event)));

  const Document before = doc_;
  touched_.clear();
  in_handler_ = true;
  ++handler_calls_;
  try {
    it->second(event.payload);
    validate_document(doc_);
  } catch (...) {
    doc_ = before;
    in_handler_ = false;
    touched_.clear();
    throw;
  }
  in_handler_ = false;

  // Changed properties only. If the handler changed nothing, its writes are
  // re-sent as-is; if it wrote nothing, one property of the event target is
  // echoed. Either way the patch is non-empty and advances the revision.
  Patch patch;
  for (const auto& [model_id, name] : touched_) {
    const Value& now = doc_.models.at(model_id).properties.at(name);
    const auto& old_props = before.models.at(model_id).properties;
    auto old = old_props.find(name);
    if (old == old_props.end() || old->second != now) patch.ops.push_back({model_id, name, now});
  }
  if (patch.ops.empty()) {
    for (const auto& [model_id, name] : touched_) {
      patch.ops.push_back({model_id, name, doc_.models.at(model_id).properties.at(name)});
    }
  }
  if (patch.ops.empty()) {
    const ModelNode& target = doc_.models.at(event.model_id);
    const auto& [name, value] = *target.properties.begin();
    patch.ops.push_back({event.model_id, name, value});
  }
  touched_.clear();
  patch.revision = ++doc_.revision;
  return patch;
}

}  // namespace elqa
