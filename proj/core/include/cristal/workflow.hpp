#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cristal/event.hpp"
#include "cristal/xml.hpp"

namespace cristal {

struct ScriptRef {
  std::string name;
  int version = 0;
  bool operator==(const ScriptRef&) const = default;
};

struct InputDecl {
  std::string collection;
  int slot = 0;
  std::string schema;
};

struct ActivityDef {
  std::string name;
  std::string role;
  bool automatic = false;
  std::optional<std::pair<std::string, int>> outcome_schema;
  std::optional<ScriptRef> script;
  std::vector<InputDecl> inputs;
};

// Control-flow tree. Sequence runs children in order; AndSplit runs all
// children with an implicit join; OrSplit evaluates its predicate once when
// reached and runs exactly one of its two children (true -> first); Loop runs
// its body, then re-enters while the predicate evaluates true.
struct WfNode {
  enum class Kind { Activity, Sequence, AndSplit, OrSplit, Loop };
  Kind kind = Kind::Sequence;
  std::string name;  // required for activities, optional for composites
  ActivityDef activity;
  std::optional<ScriptRef> predicate;  // OrSplit, Loop
  std::vector<WfNode> children;
};

struct WorkflowDef {
  int version = 0;
  WfNode root;
};

// Throws Error("MalformedWorkflow") on: no activities, composite arity
// violations, missing predicates, duplicate activity paths, automatic
// activities without scripts, or use of the reserved ItemMaintenance name.
void check_workflow(const WorkflowDef& def);

XmlNode workflow_to_xml(const WorkflowDef& def);
WorkflowDef workflow_from_xml(const XmlNode& doc);

// Runtime state of one item's workflow. All state is a pure function of the
// folded event sequence plus predicate results, which themselves only read
// already-folded state; replaying a journal therefore reconstructs an
// identical instance, including the activation log.
class WorkflowInstance {
public:
  struct Hooks {
    // Evaluates a predicate script against current item/store state.
    std::function<bool(const ScriptRef&)> eval_predicate;
  };

  struct Activation {
    std::string path;
    int cause_event;  // event id whose completion activated it; -1 at init
  };

  explicit WorkflowInstance(WorkflowDef def);

  WorkflowInstance(const WorkflowInstance&) = default;
  WorkflowInstance& operator=(const WorkflowInstance&) = default;
  WorkflowInstance(WorkflowInstance&&) = default;
  WorkflowInstance& operator=(WorkflowInstance&&) = default;

  const WorkflowDef& def() const { return def_; }
  int version() const { return def_.version; }

  // Resolves initial choices and records the first activations.
  void initialize(const Hooks& hooks);

  // Activities currently eligible for Start (or Done when automatic),
  // in document order.
  std::vector<std::string> active_paths() const;

  bool has_activity(std::string_view path) const;
  bool has_composite(std::string_view path) const;
  const ActivityDef& activity_at(std::string_view path) const;
  ActivityState state_of(std::string_view path) const;
  std::vector<std::string> all_activity_paths() const;
  // Non-terminal activities under a named composite ("" = whole workflow),
  // in document order.
  std::vector<std::string> non_terminal_under(std::string_view path) const;

  bool completed() const;
  bool aborted() const;

  // Applies one already-validated event: sets the activity state, then
  // advances control flow (choice resolution, loop iteration, activations).
  void fold_event(const Event& event, const Hooks& hooks);

  const std::vector<Activation>& activations() const { return activations_; }

private:
  struct Node {
    WfNode::Kind kind = WfNode::Kind::Sequence;
    std::string display_path;  // leaf: activity path; composite: may be ""
    ActivityDef activity;      // leaves only
    std::optional<ScriptRef> predicate;
    int parent = -1;
    std::vector<int> children;
  };

  WorkflowDef def_;
  std::vector<Node> nodes_;  // preorder; 0 is root
  std::map<std::string, int, std::less<>> leaf_by_path_;
  std::map<std::string, int, std::less<>> composite_by_path_;

  std::map<int, ActivityState> leaf_states_;
  std::map<int, size_t> or_choices_;
  std::set<int> loops_done_;
  std::map<int, int> loop_iterations_;
  std::vector<Activation> activations_;

  int index_nodes(const WfNode& node, int parent, const std::string& prefix);
  enum class Status { InProgress, Completed, Aborted };
  Status status(int id) const;
  void collect_active(int id, std::vector<int>& out) const;
  bool resolve_step(int id, const Hooks& hooks);
  void reset_subtree(int id);
  void advance(const Hooks& hooks, int cause_event);
  int leaf_id(std::string_view path) const;
};

}  // namespace cristal
