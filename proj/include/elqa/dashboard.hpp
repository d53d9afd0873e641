#pragma once

// Dashboard: the application unit. A subclass builds its document in
// `do_create`, wires callbacks in `do_setup_events`, and answers data and
// parameter queries. Client events go through `input_change`, which runs
// the registered handler and coalesces everything it touched into one patch.

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "elqa/document.hpp"

namespace elqa {

/// Source id -> column map (`{"column": [..], ...}`).
using DataPayload = std::map<std::string, Value>;
/// Name -> value filters understood by a particular dashboard.
using DataFilters = std::map<std::string, std::string>;

class Dashboard {
 public:
  using Handler = std::function<void(const Value& payload)>;

  virtual ~Dashboard() = default;

  /// Builds the document from scratch (revision 0) and validates it.
  void create();
  /// Registers callbacks; call once after `create`.
  void setup_events();

  /// Dispatches one client event. Exactly one patch (one revision step) per
  /// handled event; the document is rolled back if the handler throws.
  /// Throws NoHandler, InvalidPayload and whatever the handler raises.
  Patch input_change(const UiEvent& event);

  virtual DataPayload get_data(const DataFilters& filters) const = 0;
  virtual std::vector<std::string> get_parameter(const std::string& name) const = 0;

  const Document& document() const { return doc_; }
  bool has_handler(const std::string& model_id, EventKind event) const;
  std::vector<std::pair<std::string, EventKind>> registered_events() const;
  /// Number of handler invocations so far.
  std::size_t handler_calls() const { return handler_calls_; }

 protected:
  virtual void do_create(Document& doc) = 0;
  virtual void do_setup_events() = 0;

  /// Throws DuplicateRegistration, UnknownModel, or SchemaViolation when the
  /// event does not apply to the model's kind.
  void register_handler(const std::string& model_id, EventKind event, Handler handler);

  /// Writes a property. Inside a handler the write is recorded for the
  /// outgoing patch; it never triggers another handler.
  void set_property(const std::string& model_id, const std::string& name, Value value);
  const Value& property(const std::string& model_id, const std::string& name) const;

 private:
  Document doc_;
  std::map<std::pair<std::string, EventKind>, Handler> handlers_;
  std::vector<std::pair<std::string, std::string>> touched_;
  bool in_handler_ = false;
  std::size_t handler_calls_ = 0;
};

}  // namespace elqa
