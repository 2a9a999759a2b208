#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cristal/store.hpp"

namespace cristal {

// Assigns a workflow to an item that has none and activates the first
// activities. Journaled as a WorkflowAssigned record.
void init_workflow(Store& store, const Uuid& item, const WorkflowDef& def);

// Activities currently eligible for Start (or Done when automatic).
std::vector<std::string> active_activities(const Store& store, const Uuid& item);

// Requests one transition on an activity (or Abort on a named composite,
// which aborts every non-terminal activity underneath, one event each, in
// document order). Done on an automatic activity emits a Start/Complete pair
// with identical timestamps, the second event carrying the outcome. All
// emitted events are committed and journaled atomically; a rejected request
// changes nothing.
std::vector<Event> request_transition(Store& store, const Agent& agent,
                                      const Uuid& item,
                                      std::string_view activity_path,
                                      Transition transition,
                                      const std::optional<XmlNode>& outcome =
                                          std::nullopt);

// Evaluates a registered predicate script against the item's current state.
bool evaluate_predicate(const Store& store, const Uuid& item,
                        const ScriptRef& script);

// Repeatedly applies Done to every active automatic activity until none is
// active, in document order. Activities marked with the reserved "amend"
// script are driven by the description engine and are skipped here.
std::vector<Event> run_automatic(Store& store, const Uuid& item,
                                 const std::string& agent_name = "system");

// Builds an outcome document skeleton from the schema (minOccurs copies of
// required structure) and applies `Root/Leaf := value` assignments.
XmlNode build_outcome_document(
    const ElementSpec& root,
    const std::vector<std::pair<std::string, ScriptValue>>& assignments);

}  // namespace cristal
