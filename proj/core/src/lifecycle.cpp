#include "cristal/lifecycle.hpp"

#include <algorithm>
#include <climits>
#include <map>

#include "cristal/errors.hpp"

namespace cristal {

namespace {

// Minimal as-of view of an item: property values, slot targets, and
// viewpoints as they stood before a given global journal rank.
struct ItemView {
  std::map<std::string, std::string> props;
  std::map<std::string, std::string> slot_targets;  // "collection:slot"
  std::map<std::pair<std::string, std::string>, int> viewpoints;
};

ItemView build_view(const Item& item, long horizon) {
  ItemView view;
  for (const Property& p : item.creation_properties) {
    view.props[p.name] = p.value;
  }
  std::map<std::string, int> counts;
  for (size_t i = 0; i < item.events.size(); ++i) {
    if (item.event_seq[i] >= horizon) break;
    const Event& e = item.events[i];
    if (!e.has_outcome()) continue;
    auto oit = item.outcomes.find(e.event_id);
    if (oit == item.outcomes.end()) continue;
    int number = counts[*e.schema_name]++;
    view.viewpoints[{*e.schema_name, std::to_string(number)}] = e.event_id;
    view.viewpoints[{*e.schema_name, "last"}] = e.event_id;
    if (e.activity != kItemMaintenanceActivity) continue;
    XmlNode doc = parse_xml(oit->second.document);
    if (doc.name == kPropertyChangeSchema) {
      const XmlNode* name = doc.child("Name");
      const XmlNode* value = doc.child("New");
      if (name && value) view.props[name->text] = value->text;
    } else if (doc.name == kCollectionChangeSchema) {
      const XmlNode* coll = doc.child("Collection");
      const XmlNode* slot = doc.child("Slot");
      const XmlNode* value = doc.child("New");
      if (coll && slot && value) {
        view.slot_targets[coll->text + ":" + slot->text] = value->text;
      }
    }
  }
  return view;
}

std::optional<ValueKind> kind_at_path(const ElementSpec& spec,
                                      const std::string& prefix,
                                      std::string_view path) {
  std::string here = prefix.empty() ? spec.name : prefix + "/" + spec.name;
  if (spec.kind == ValueKind::Any) return ValueKind::String;
  if (is_scalar_kind(spec.kind)) {
    if (here == path) return spec.kind;
    return std::nullopt;
  }
  if (!path.starts_with(here + "/")) return std::nullopt;
  for (const ElementSpec& child : spec.children) {
    if (auto k = kind_at_path(child, here, path)) return k;
  }
  return std::nullopt;
}

const XmlNode* walk_path(const XmlNode& doc, std::string_view path) {
  size_t slash = path.find('/');
  std::string_view head = slash == std::string_view::npos ? path
                                                          : path.substr(0, slash);
  if (doc.name != head) return nullptr;
  const XmlNode* node = &doc;
  while (slash != std::string_view::npos) {
    path = path.substr(slash + 1);
    slash = path.find('/');
    std::string_view seg =
        slash == std::string_view::npos ? path : path.substr(0, slash);
    node = node->child(seg);
    if (!node) return nullptr;
  }
  return node;
}

ScriptValue typed_leaf(const SchemaRegistry& schemas,
                       const StoredOutcome& outcome, const std::string& path) {
  XmlNode doc = parse_xml(outcome.document);
  const XmlNode* leaf = walk_path(doc, path);
  if (!leaf) return ScriptValue::string("");  // missing optional reads as empty
  const SchemaDef& def =
      schemas.get(outcome.schema_name, outcome.schema_version);
  std::optional<ValueKind> kind = kind_at_path(def.root, "", path);
  if (kind == ValueKind::Integer || kind == ValueKind::Decimal) {
    if (auto d = Decimal::parse(leaf->text)) return ScriptValue::decimal(d->str());
  }
  if (kind == ValueKind::Boolean && lex_boolean(leaf->text)) {
    return ScriptValue::boolean(leaf->text == "true");
  }
  return ScriptValue::string(leaf->text);
}

}  // namespace

ScriptContext Store::script_context_at(const Uuid& uuid, long horizon) const {
  ScriptContext ctx;
  const Store* store = this;
  ctx.prop = [store, uuid, horizon](const std::string& name) -> ScriptValue {
    const Item& item = store->item(uuid);
    if (horizon == LONG_MAX) {
      const Property* p = item.find_property(name);
      if (!p) fail("EvaluationError", "no property '" + name + "'");
      return ScriptValue::string(p->value);
    }
    ItemView view = build_view(item, horizon);
    auto it = view.props.find(name);
    if (it == view.props.end()) {
      fail("EvaluationError", "no property '" + name + "'");
    }
    return ScriptValue::string(it->second);
  };
  ctx.field = [store, uuid, horizon](const std::string& schema,
                                     const std::string& view_name,
                                     const std::string& path) -> ScriptValue {
    const Item& item = store->item(uuid);
    int event_id = -1;
    if (horizon == LONG_MAX) {
      auto it = item.viewpoints.find({schema, view_name});
      if (it == item.viewpoints.end()) {
        fail("EvaluationError",
             "no viewpoint (" + schema + ", " + view_name + ")");
      }
      event_id = it->second;
    } else {
      ItemView view = build_view(item, horizon);
      auto it = view.viewpoints.find({schema, view_name});
      if (it == view.viewpoints.end()) {
        fail("EvaluationError",
             "no viewpoint (" + schema + ", " + view_name + ")");
      }
      event_id = it->second;
    }
    return typed_leaf(store->schemas(), item.outcomes.at(event_id), path);
  };
  ctx.input = [store, uuid, horizon](const std::string& collection, int slot,
                                     const std::string& schema,
                                     const std::string& path) -> ScriptValue {
    const Item& item = store->item(uuid);
    std::string target;
    if (horizon == LONG_MAX) {
      const CollectionState* c = item.find_collection(collection);
      if (!c) fail("EvaluationError", "no collection '" + collection + "'");
      if (slot < 0 || slot >= static_cast<int>(c->slots.size())) {
        fail("EvaluationError", "no slot " + std::to_string(slot) + " in '" +
                                    collection + "'");
      }
      target = c->slots[static_cast<size_t>(slot)].target;
    } else {
      ItemView view = build_view(item, horizon);
      auto it = view.slot_targets.find(collection + ":" + std::to_string(slot));
      if (it != view.slot_targets.end()) target = it->second;
    }
    if (target.empty()) {
      fail("EvaluationError", "slot " + collection + ":" +
                                  std::to_string(slot) + " is unassigned");
    }
    const Item& linked = store->item(target);
    int event_id = -1;
    if (horizon == LONG_MAX) {
      auto it = linked.viewpoints.find({schema, std::string("last")});
      if (it == linked.viewpoints.end()) {
        fail("EvaluationError", "linked item has no outcome of '" + schema + "'");
      }
      event_id = it->second;
    } else {
      ItemView view = build_view(linked, horizon);
      auto it = view.viewpoints.find({schema, std::string("last")});
      if (it == view.viewpoints.end()) {
        fail("EvaluationError", "linked item has no outcome of '" + schema + "'");
      }
      event_id = it->second;
    }
    return typed_leaf(store->schemas(), linked.outcomes.at(event_id), path);
  };
  return ctx;
}

ScriptContext Store::script_context(const Uuid& uuid) const {
  return script_context_at(uuid, LONG_MAX);
}

WorkflowInstance::Hooks Store::instance_hooks(const Uuid& uuid) {
  WorkflowInstance::Hooks hooks;
  const Store* store = this;
  hooks.eval_predicate = [store, uuid](const ScriptRef& ref) {
    const Script& script = store->scripts().get(ref.name, ref.version);
    return script.evaluate_bool(store->script_context(uuid));
  };
  return hooks;
}

void init_workflow(Store& store, const Uuid& item, const WorkflowDef& def) {
  check_workflow(def);
  store.assign_workflow(item, def);
}

std::vector<std::string> active_activities(const Store& store, const Uuid& item) {
  const Item& it = store.item(item);
  if (!it.workflow) fail("NoWorkflow", "item " + item + " has no workflow");
  return it.workflow->active_paths();
}

bool evaluate_predicate(const Store& store, const Uuid& item,
                        const ScriptRef& script) {
  const Script& s = store.scripts().get(script.name, script.version);
  return s.evaluate_bool(store.script_context(item));
}

XmlNode build_outcome_document(
    const ElementSpec& root,
    const std::vector<std::pair<std::string, ScriptValue>>& assignments) {
  struct Builder {
    XmlNode skeleton(const ElementSpec& spec) {
      XmlNode node;
      node.name = spec.name;
      if (spec.kind == ValueKind::Composite) {
        for (const ElementSpec& child : spec.children) {
          for (int i = 0; i < child.min_occurs; ++i) {
            node.children.push_back(skeleton(child));
          }
        }
      }
      return node;
    }
  } builder;

  XmlNode doc = builder.skeleton(root);
  for (const auto& [path, value] : assignments) {
    std::vector<std::string> segments;
    size_t start = 0;
    for (size_t i = 0; i <= path.size(); ++i) {
      if (i == path.size() || path[i] == '/') {
        segments.push_back(path.substr(start, i - start));
        start = i + 1;
      }
    }
    if (segments.empty() || segments.front() != root.name) {
      fail("ScriptFailure", "assignment path '" + path +
                                "' does not start at the outcome root");
    }
    XmlNode* node = &doc;
    const ElementSpec* spec = &root;
    for (size_t s = 1; s < segments.size(); ++s) {
      const ElementSpec* child_spec = nullptr;
      for (const ElementSpec& cs : spec->children) {
        if (cs.name == segments[s]) {
          child_spec = &cs;
          break;
        }
      }
      if (!child_spec) {
        fail("ScriptFailure", "assignment path '" + path +
                                  "' is not in the outcome schema");
      }
      XmlNode* next = nullptr;
      for (XmlNode& c : node->children) {
        if (c.name == segments[s]) {
          next = &c;
          break;
        }
      }
      if (!next) {
        // Optional element not in the skeleton: insert it in schema order.
        size_t insert_at = node->children.size();
        bool passed_self = false;
        size_t pos = 0;
        for (const ElementSpec& cs : spec->children) {
          if (cs.name == segments[s]) {
            passed_self = true;
            continue;
          }
          while (pos < node->children.size() &&
                 node->children[pos].name == cs.name) {
            ++pos;
          }
          if (passed_self) {
            insert_at = pos;
            break;
          }
        }
        XmlNode fresh;
        fresh.name = segments[s];
        node->children.insert(
            node->children.begin() + static_cast<long>(std::min(
                                         insert_at, node->children.size())),
            std::move(fresh));
        next = &node->children[std::min(insert_at, node->children.size() - 1)];
      }
      node = next;
      spec = child_spec;
    }
    node->text = value.text;
  }
  return doc;
}

namespace {

std::string summarize(const ValidationReport& report) {
  std::string out;
  for (size_t i = 0; i < report.violations.size(); ++i) {
    if (i) out += "; ";
    const Violation& v = report.violations[i];
    out += std::string(violation_code_name(v.code)) + " at " + v.path;
  }
  return out;
}

bool is_engine_driven(const ActivityDef& def) {
  return def.script && def.script->name == "amend";
}

}  // namespace

std::vector<Event> request_transition(Store& store, const Agent& agent,
                                      const Uuid& uuid,
                                      std::string_view activity_path,
                                      Transition transition,
                                      const std::optional<XmlNode>& outcome) {
  const Item& item = store.item(uuid);
  if (!item.workflow) fail("NoWorkflow", "item " + uuid + " has no workflow");
  const WorkflowInstance& wf = *item.workflow;

  const std::string ts = store.now();
  std::vector<Store::PendingEvent> pending;

  if (!wf.has_activity(activity_path)) {
    if (!wf.has_composite(activity_path)) {
      fail("NoSuchActivity",
           "no activity at path '" + std::string(activity_path) + "'");
    }
    if (transition != Transition::Abort) {
      fail("InvalidTransition", "composite nodes only accept Abort");
    }
    std::vector<std::string> leaves = wf.non_terminal_under(activity_path);
    if (leaves.empty()) {
      fail("InvalidTransition", "nothing to abort under '" +
                                    std::string(activity_path) + "'");
    }
    for (const std::string& leaf : leaves) {
      const ActivityDef& def = wf.activity_at(leaf);
      if (!agent.holds(def.role)) {
        fail("RoleDenied", "agent '" + agent.name + "' lacks role '" +
                               def.role + "' required by " + leaf);
      }
      Event e;
      e.activity = leaf;
      e.previous_state = wf.state_of(leaf);
      e.target_state = ActivityState::Aborted;
      e.transition = Transition::Abort;
      e.agent_name = agent.name;
      e.agent_role = def.role;
      e.timestamp = ts;
      pending.push_back({std::move(e), std::nullopt});
    }
    return store.commit_events(uuid, std::move(pending));
  }

  const ActivityDef& def = wf.activity_at(activity_path);
  ActivityState state = wf.state_of(activity_path);
  auto target = transition_target(state, transition);
  if (!target) {
    fail("InvalidTransition",
         std::string(to_string(transition)) + " is not legal from " +
             std::string(to_string(state)) + " on '" +
             std::string(activity_path) + "'");
  }
  if (transition == Transition::Done && !def.automatic) {
    fail("InvalidTransition", "'" + def.name + "' is manual; Done applies to "
                                               "automatic activities only");
  }
  if (def.automatic && transition != Transition::Done &&
      transition != Transition::Abort) {
    fail("InvalidTransition",
         "'" + def.name + "' is automatic; drive it with Done");
  }
  if (transition == Transition::Start || transition == Transition::Done) {
    std::vector<std::string> active = wf.active_paths();
    if (std::find(active.begin(), active.end(),
                  std::string(activity_path)) == active.end()) {
      fail("InvalidTransition", "'" + std::string(activity_path) +
                                    "' is not active yet");
    }
  }
  if (!agent.holds(def.role)) {
    fail("RoleDenied", "agent '" + agent.name + "' lacks role '" + def.role +
                           "' required by " + std::string(activity_path));
  }

  if (transition == Transition::Done) {
    std::optional<XmlNode> produced;
    if (!def.outcome_schema) {
      if (outcome) {
        fail("OutcomeInvalid",
             "'" + def.name + "' declares no outcome schema");
      }
    } else if (is_engine_driven(def)) {
      if (!outcome) {
        fail("OutcomeRequired", "'" + def.name + "' needs a document");
      }
      produced = outcome;
    } else {
      if (outcome) {
        fail("OutcomeInvalid", "automatic activities produce their own outcome");
      }
      const Script& script =
          store.scripts().get(def.script->name, def.script->version);
      std::vector<std::pair<std::string, ScriptValue>> values;
      try {
        values = script.run_assignments(store.script_context(uuid));
      } catch (const Error& e) {
        if (e.name() == "UnknownScript") throw;
        fail("ScriptFailure",
             std::string(activity_path) + ": " + e.name() + ": " + e.what());
      }
      const SchemaDef& schema = store.schemas().get(def.outcome_schema->first,
                                                    def.outcome_schema->second);
      produced = build_outcome_document(schema.root, values);
    }
    if (produced) {
      ValidationReport report = store.schemas().validate(
          *produced, def.outcome_schema->first,
          std::to_string(def.outcome_schema->second));
      if (!report.valid) {
        if (is_engine_driven(def)) {
          fail("OutcomeInvalid", summarize(report));
        }
        fail("ScriptFailure", "script produced an invalid outcome: " +
                                  summarize(report));
      }
    }

    Event start;
    start.activity = std::string(activity_path);
    start.previous_state = ActivityState::Waiting;
    start.target_state = ActivityState::Started;
    start.transition = Transition::Start;
    start.agent_name = agent.name;
    start.agent_role = def.role;
    start.timestamp = ts;
    Event complete = start;
    complete.previous_state = ActivityState::Started;
    complete.target_state = ActivityState::Completed;
    complete.transition = Transition::Complete;
    if (produced) {
      complete.schema_name = def.outcome_schema->first;
      complete.schema_version = def.outcome_schema->second;
    }
    pending.push_back({std::move(start), std::nullopt});
    pending.push_back({std::move(complete), std::move(produced)});
    return store.commit_events(uuid, std::move(pending));
  }

  // Manual transition: one event.
  Event e;
  e.activity = std::string(activity_path);
  e.previous_state = state;
  e.target_state = *target;
  e.transition = transition;
  e.agent_name = agent.name;
  e.agent_role = def.role;
  e.timestamp = ts;
  std::optional<XmlNode> attached;
  if (*target == ActivityState::Completed && def.outcome_schema) {
    if (!outcome) {
      fail("OutcomeRequired", "'" + std::string(activity_path) +
                                  "' requires an outcome of schema " +
                                  def.outcome_schema->first);
    }
    ValidationReport report = store.schemas().validate(
        *outcome, def.outcome_schema->first,
        std::to_string(def.outcome_schema->second));
    if (!report.valid) fail("OutcomeInvalid", summarize(report));
    e.schema_name = def.outcome_schema->first;
    e.schema_version = def.outcome_schema->second;
    attached = outcome;
  } else if (outcome) {
    fail("OutcomeInvalid", "transition does not take an outcome document");
  }
  pending.push_back({std::move(e), std::move(attached)});
  return store.commit_events(uuid, std::move(pending));
}

std::vector<Event> run_automatic(Store& store, const Uuid& uuid,
                                 const std::string& agent_name) {
  std::vector<Event> all;
  for (;;) {
    const Item& item = store.item(uuid);
    if (!item.workflow) return all;
    std::string next;
    const ActivityDef* next_def = nullptr;
    for (const std::string& path : item.workflow->active_paths()) {
      const ActivityDef& def = item.workflow->activity_at(path);
      if (def.automatic && !is_engine_driven(def)) {
        next = path;
        next_def = &def;
        break;
      }
    }
    if (!next_def) return all;
    Agent agent{agent_name, {next_def->role}};
    std::vector<Event> emitted =
        request_transition(store, agent, uuid, next, Transition::Done);
    all.insert(all.end(), emitted.begin(), emitted.end());
  }
}

}  // namespace cristal
