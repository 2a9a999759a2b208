#include "cristal/provenance.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cristal/errors.hpp"
#include "cristal/lifecycle.hpp"

namespace cristal {

Trace trace(const Store& store, const Uuid& uuid) {
  const Item& item = store.item(uuid);
  Trace t;
  t.item = uuid;
  for (const Event& e : item.events) {
    TraceEntry entry;
    entry.event = e;
    auto oit = item.outcomes.find(e.event_id);
    entry.outcome = oit == item.outcomes.end() ? nullptr : &oit->second;
    entry.agent = Agent{e.agent_name, {e.agent_role}};
    t.entries.push_back(std::move(entry));
  }
  return t;
}

XmlNode trace_to_xml(const Trace& trace) {
  XmlNode out;
  out.name = "Trace";
  out.set_attr("item", trace.item);
  for (const TraceEntry& entry : trace.entries) {
    XmlNode en;
    en.name = "Entry";
    XmlNode ev;
    ev.name = "Event";
    const Event& e = entry.event;
    ev.set_attr("id", std::to_string(e.event_id));
    ev.set_attr("activity", e.activity);
    ev.set_attr("prev", to_string(e.previous_state));
    ev.set_attr("target", to_string(e.target_state));
    ev.set_attr("transition", to_string(e.transition));
    if (e.schema_name) {
      ev.set_attr("schema", *e.schema_name);
      ev.set_attr("schemaVersion", std::to_string(*e.schema_version));
    }
    ev.set_attr("agent", e.agent_name);
    ev.set_attr("role", e.agent_role);
    ev.set_attr("ts", e.timestamp);
    en.children.push_back(std::move(ev));
    if (entry.outcome) {
      XmlNode on;
      on.name = "Outcome";
      on.set_attr("event", std::to_string(entry.outcome->event_id));
      on.children.push_back(parse_xml(entry.outcome->document));
      en.children.push_back(std::move(on));
    }
    out.children.push_back(std::move(en));
  }
  return out;
}

std::string_view edge_type_name(EdgeType type) {
  switch (type) {
    case EdgeType::Used: return "Used";
    case EdgeType::WasGeneratedBy: return "WasGeneratedBy";
    case EdgeType::WasControlledBy: return "WasControlledBy";
    case EdgeType::WasTriggeredBy: return "WasTriggeredBy";
    case EdgeType::WasDerivedFrom: return "WasDerivedFrom";
  }
  return "Used";
}

namespace {

std::optional<EdgeType> edge_type_from(std::string_view name) {
  if (name == "Used") return EdgeType::Used;
  if (name == "WasGeneratedBy") return EdgeType::WasGeneratedBy;
  if (name == "WasControlledBy") return EdgeType::WasControlledBy;
  if (name == "WasTriggeredBy") return EdgeType::WasTriggeredBy;
  if (name == "WasDerivedFrom") return EdgeType::WasDerivedFrom;
  return std::nullopt;
}

std::string artifact_id(const Uuid& item, int event_id) {
  return "outcome:" + item + ":" + std::to_string(event_id);
}

std::string event_ref(const Uuid& item, int event_id) {
  return item + ":" + std::to_string(event_id);
}

struct Span {
  std::string process_id;
  std::string activity;
  int start_event = 0;
  int end_event = -1;  // last event folded into the span
  bool completed = false;
  std::string agent;
  std::vector<int> outcome_events;
};

// Slices one item's event list into activity execution spans.
std::vector<Span> build_spans(const Item& item) {
  std::vector<Span> spans;
  std::map<std::string, size_t> open;  // activity path -> span index
  for (const Event& e : item.events) {
    if (e.activity == kItemMaintenanceActivity) {
      Span s;
      s.activity = e.activity;
      s.start_event = e.event_id;
      s.end_event = e.event_id;
      s.completed = true;
      s.agent = e.agent_name;
      s.process_id =
          "process:" + item.uuid + ":" + e.activity + ":" +
          std::to_string(e.event_id);
      if (e.has_outcome()) s.outcome_events.push_back(e.event_id);
      spans.push_back(std::move(s));
      continue;
    }
    auto it = open.find(e.activity);
    if (it == open.end()) {
      Span s;
      s.activity = e.activity;
      s.start_event = e.event_id;
      s.end_event = e.event_id;
      s.agent = e.agent_name;
      s.process_id = "process:" + item.uuid + ":" + e.activity + ":" +
                     std::to_string(e.event_id);
      if (e.has_outcome()) s.outcome_events.push_back(e.event_id);
      bool terminal = is_terminal(e.target_state);
      s.completed = e.target_state == ActivityState::Completed;
      spans.push_back(std::move(s));
      if (!terminal) open[e.activity] = spans.size() - 1;
      continue;
    }
    Span& s = spans[it->second];
    s.end_event = e.event_id;
    s.agent = e.agent_name;
    if (e.has_outcome()) s.outcome_events.push_back(e.event_id);
    if (is_terminal(e.target_state)) {
      s.completed = e.target_state == ActivityState::Completed;
      open.erase(it);
    }
  }
  return spans;
}

void sort_graph(ProvGraph& graph) {
  std::sort(graph.artifacts.begin(), graph.artifacts.end());
  graph.artifacts.erase(
      std::unique(graph.artifacts.begin(), graph.artifacts.end()),
      graph.artifacts.end());
  std::sort(graph.processes.begin(), graph.processes.end());
  graph.processes.erase(
      std::unique(graph.processes.begin(), graph.processes.end()),
      graph.processes.end());
  std::sort(graph.agents.begin(), graph.agents.end());
  graph.agents.erase(std::unique(graph.agents.begin(), graph.agents.end()),
                     graph.agents.end());
  std::sort(graph.edges.begin(), graph.edges.end());
  graph.edges.erase(std::unique(graph.edges.begin(), graph.edges.end()),
                    graph.edges.end());
}

}  // namespace

ProvGraph build_graph(const Store& store, const std::vector<Uuid>& roots,
                      int depth) {
  // Collect the item scope by following current collection links.
  std::set<Uuid> scope;
  std::vector<std::pair<Uuid, int>> queue;
  for (const Uuid& r : roots) {
    store.item(r);  // UnknownItem check
    queue.push_back({r, 0});
  }
  while (!queue.empty()) {
    auto [uuid, d] = queue.back();
    queue.pop_back();
    if (!scope.insert(uuid).second) continue;
    if (depth >= 0 && d >= depth) continue;
    const Item& item = store.item(uuid);
    for (const CollectionState& c : item.collections) {
      for (const SlotState& s : c.slots) {
        if (!s.target.empty() && store.has_item(s.target)) {
          queue.push_back({s.target, d + 1});
        }
      }
    }
  }

  ProvGraph graph;
  for (const Uuid& uuid : scope) {
    const Item& item = store.item(uuid);
    std::vector<Span> spans = build_spans(item);

    // Map event id -> process id, for trigger edges.
    std::map<int, std::string> process_of_event;
    for (const Span& s : spans) {
      for (int e = s.start_event; e <= s.end_event; ++e) {
        process_of_event[e] = s.process_id;
      }
    }

    for (const Span& s : spans) {
      graph.processes.push_back(s.process_id);
      graph.agents.push_back("agent:" + s.agent);
      graph.edges.push_back({EdgeType::WasControlledBy, s.process_id,
                             "agent:" + s.agent,
                             event_ref(uuid, s.end_event)});

      std::vector<std::string> used_artifacts;
      if (s.activity != kItemMaintenanceActivity && item.workflow &&
          item.workflow->has_activity(s.activity) && s.completed) {
        const ActivityDef& def = item.workflow->activity_at(s.activity);
        for (const InputDecl& input : def.inputs) {
          // Resolve the input at the completing event's time.
          long horizon = 0;
          for (size_t i = 0; i < item.events.size(); ++i) {
            if (item.events[i].event_id == s.start_event) {
              horizon = item.event_seq[i];
              break;
            }
          }
          const CollectionState* c = item.find_collection(input.collection);
          if (!c || input.slot < 0 ||
              input.slot >= static_cast<int>(c->slots.size())) {
            continue;
          }
          // Walk this item's maintenance history for the slot state at the
          // horizon.
          std::string target;
          for (size_t i = 0;
               i < item.events.size() && item.event_seq[i] < horizon; ++i) {
            const Event& e = item.events[i];
            if (e.activity != kItemMaintenanceActivity || !e.has_outcome() ||
                *e.schema_name != kCollectionChangeSchema) {
              continue;
            }
            XmlNode doc = parse_xml(item.outcomes.at(e.event_id).document);
            const XmlNode* coll = doc.child("Collection");
            const XmlNode* slot = doc.child("Slot");
            const XmlNode* next = doc.child("New");
            if (coll && slot && next && coll->text == input.collection &&
                slot->text == std::to_string(input.slot)) {
              target = next->text;
            }
          }
          if (target.empty() || !store.has_item(target)) continue;
          const Item& linked = store.item(target);
          int best = -1;
          for (size_t i = 0;
               i < linked.events.size() && linked.event_seq[i] < horizon; ++i) {
            const Event& e = linked.events[i];
            if (e.has_outcome() && *e.schema_name == input.schema) {
              best = e.event_id;
            }
          }
          if (best < 0) continue;
          std::string art = artifact_id(target, best);
          graph.artifacts.push_back(art);
          used_artifacts.push_back(art);
          graph.edges.push_back({EdgeType::Used, s.process_id, art,
                                 event_ref(uuid, s.end_event)});
        }
      }

      for (int outcome_event : s.outcome_events) {
        std::string art = artifact_id(uuid, outcome_event);
        graph.artifacts.push_back(art);
        graph.edges.push_back({EdgeType::WasGeneratedBy, art, s.process_id,
                               event_ref(uuid, outcome_event)});
        for (const std::string& used : used_artifacts) {
          graph.edges.push_back({EdgeType::WasDerivedFrom, art, used,
                                 event_ref(uuid, outcome_event)});
        }
      }
    }

    // Trigger edges from the activation log: the k-th activation of a path
    // pairs with the k-th span of that path.
    if (item.workflow) {
      std::map<std::string, std::vector<const Span*>> spans_by_path;
      for (const Span& s : spans) {
        if (s.activity != kItemMaintenanceActivity) {
          spans_by_path[s.activity].push_back(&s);
        }
      }
      std::map<std::string, size_t> seen;
      for (const WorkflowInstance::Activation& a : item.workflow->activations()) {
        size_t k = seen[a.path]++;
        if (a.cause_event < 0) continue;
        auto it = spans_by_path.find(a.path);
        if (it == spans_by_path.end() || k >= it->second.size()) continue;
        auto cause = process_of_event.find(a.cause_event);
        if (cause == process_of_event.end()) continue;
        graph.edges.push_back({EdgeType::WasTriggeredBy,
                               it->second[k]->process_id, cause->second,
                               event_ref(uuid, a.cause_event)});
      }
    }
  }

  sort_graph(graph);
  return graph;
}

std::string export_opm(const ProvGraph& graph) {
  XmlNode out;
  out.name = "OPMGraph";
  for (const std::string& id : graph.artifacts) {
    XmlNode n;
    n.name = "Artifact";
    n.set_attr("id", id);
    out.children.push_back(std::move(n));
  }
  for (const std::string& id : graph.processes) {
    XmlNode n;
    n.name = "Process";
    n.set_attr("id", id);
    out.children.push_back(std::move(n));
  }
  for (const std::string& id : graph.agents) {
    XmlNode n;
    n.name = "Agent";
    n.set_attr("id", id);
    out.children.push_back(std::move(n));
  }
  for (const ProvGraph::Edge& e : graph.edges) {
    XmlNode n;
    n.name = std::string(edge_type_name(e.type));
    n.set_attr("effect", e.effect);
    n.set_attr("cause", e.cause);
    n.set_attr("event", e.event);
    out.children.push_back(std::move(n));
  }
  return to_pretty_xml(out);
}

ProvGraph parse_opm(const XmlNode& doc) {
  if (doc.name != "OPMGraph") {
    fail("MalformedGraph", "expected <OPMGraph>, got <" + doc.name + ">");
  }
  ProvGraph graph;
  for (const XmlNode& child : doc.children) {
    if (child.name == "Artifact") {
      graph.artifacts.push_back(child.attr_or("id", ""));
    } else if (child.name == "Process") {
      graph.processes.push_back(child.attr_or("id", ""));
    } else if (child.name == "Agent") {
      graph.agents.push_back(child.attr_or("id", ""));
    } else if (auto type = edge_type_from(child.name)) {
      graph.edges.push_back({*type, child.attr_or("effect", ""),
                             child.attr_or("cause", ""),
                             child.attr_or("event", "")});
    } else {
      fail("MalformedGraph", "unexpected <" + child.name + "> in OPMGraph");
    }
  }
  sort_graph(graph);
  return graph;
}

ReplayReport replay_verify(const Store& store, const Uuid& uuid) {
  const Item& item = store.item(uuid);
  for (size_t i = 0; i < item.events.size(); ++i) {
    const Event& e = item.events[i];
    if (!e.has_outcome()) continue;
    auto oit = item.outcomes.find(e.event_id);
    if (oit == item.outcomes.end()) {
      return {false, e.event_id, "outcome record missing"};
    }
    const StoredOutcome& stored = oit->second;

    bool regenerate = false;
    const ActivityDef* def = nullptr;
    if (e.activity != kItemMaintenanceActivity && item.workflow &&
        item.workflow->has_activity(e.activity)) {
      def = &item.workflow->activity_at(e.activity);
      regenerate = def->automatic && def->script && def->script->name != "amend";
    }

    if (regenerate) {
      if (!store.scripts().has(def->script->name, def->script->version)) {
        fail("MissingDescription", "script " + def->script->name + " v" +
                                       std::to_string(def->script->version) +
                                       " is not available");
      }
      if (!store.schemas().has(stored.schema_name, stored.schema_version)) {
        fail("MissingDescription", "schema " + stored.schema_name + " v" +
                                       std::to_string(stored.schema_version) +
                                       " is not available");
      }
      // Inputs as the script saw them: everything journaled strictly before
      // the Start event of this execution pair.
      long horizon = item.event_seq[i];
      if (i > 0 && item.events[i - 1].activity == e.activity &&
          item.events[i - 1].transition == Transition::Start) {
        horizon = item.event_seq[i - 1];
      }
      const Script& script =
          store.scripts().get(def->script->name, def->script->version);
      std::string regenerated;
      try {
        auto values =
            script.run_assignments(store.script_context_at(uuid, horizon));
        const SchemaDef& schema =
            store.schemas().get(stored.schema_name, stored.schema_version);
        regenerated = to_canonical_xml(build_outcome_document(schema.root, values));
      } catch (const Error& err) {
        return {false, e.event_id,
                "script re-execution failed: " + std::string(err.what())};
      }
      if (regenerated != stored.document) {
        return {false, e.event_id,
                "regenerated outcome differs from the stored document"};
      }
      continue;
    }

    // Manual (and engine-driven) outcomes: re-validate only.
    if (!store.schemas().has(stored.schema_name, stored.schema_version)) {
      fail("MissingDescription", "schema " + stored.schema_name + " v" +
                                     std::to_string(stored.schema_version) +
                                     " is not available");
    }
    ValidationReport report = store.schemas().validate_text(
        stored.document, stored.schema_name,
        std::to_string(stored.schema_version));
    if (!report.valid) {
      return {false, e.event_id, "stored outcome no longer validates"};
    }
  }
  return {true, std::nullopt, ""};
}

}  // namespace cristal
