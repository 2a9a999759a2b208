#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cristal/store.hpp"

namespace cristal {

struct TraceEntry {
  Event event;
  const StoredOutcome* outcome = nullptr;  // null when the event carries none
  Agent agent;                             // name and the role used
};

struct Trace {
  Uuid item;
  std::vector<TraceEntry> entries;  // complete, in event id order
};

Trace trace(const Store& store, const Uuid& item);
XmlNode trace_to_xml(const Trace& trace);

enum class EdgeType { Used, WasGeneratedBy, WasControlledBy, WasTriggeredBy,
                      WasDerivedFrom };
std::string_view edge_type_name(EdgeType type);

// Typed provenance DAG. A Process is one activity execution span (adjacent
// Start..Complete events, or a single maintenance event); artifacts are
// outcome references; agents are the controlling actors. All node and edge
// lists are kept sorted, so exports are deterministic.
struct ProvGraph {
  struct Edge {
    EdgeType type;
    std::string effect;
    std::string cause;
    std::string event;  // "<item uuid>:<event id>" of the causing event
    auto operator<=>(const Edge&) const = default;
  };
  std::vector<std::string> artifacts;
  std::vector<std::string> processes;
  std::vector<std::string> agents;
  std::vector<Edge> edges;

  bool operator==(const ProvGraph&) const = default;
};

// depth < 0 means unbounded traversal over collection links.
ProvGraph build_graph(const Store& store, const std::vector<Uuid>& roots,
                      int depth);

std::string export_opm(const ProvGraph& graph);   // canonical pretty XML
ProvGraph parse_opm(const XmlNode& doc);

struct ReplayReport {
  bool ok = true;
  std::optional<int> divergence_event;  // first diverging event id
  std::string detail;
};

// Re-executes every automatic activity from its recorded inputs and compares
// the regenerated outcome bytes with the stored ones; manual outcomes are
// re-validated against their recorded schema versions.
ReplayReport replay_verify(const Store& store, const Uuid& item);

}  // namespace cristal
