#include "cristal/workflow.hpp"

#include <algorithm>
#include <charconv>

#include "cristal/errors.hpp"
#include "cristal/values.hpp"

namespace cristal {

namespace {

std::string_view node_kind_name(WfNode::Kind kind) {
  switch (kind) {
    case WfNode::Kind::Activity: return "Activity";
    case WfNode::Kind::Sequence: return "Sequence";
    case WfNode::Kind::AndSplit: return "AndSplit";
    case WfNode::Kind::OrSplit: return "OrSplit";
    case WfNode::Kind::Loop: return "Loop";
  }
  return "Sequence";
}

std::optional<WfNode::Kind> node_kind_from(std::string_view name) {
  if (name == "Activity") return WfNode::Kind::Activity;
  if (name == "Sequence") return WfNode::Kind::Sequence;
  if (name == "AndSplit") return WfNode::Kind::AndSplit;
  if (name == "OrSplit") return WfNode::Kind::OrSplit;
  if (name == "Loop") return WfNode::Kind::Loop;
  return std::nullopt;
}

int to_int(const std::string& text) {
  int value = 0;
  std::from_chars(text.data(), text.data() + text.size(), value);
  return value;
}

void check_node(const WfNode& node, const std::string& prefix,
                std::set<std::string>& paths, int& activity_count) {
  auto bad = [&](const std::string& why) {
    fail("MalformedWorkflow", why);
  };
  if (node.kind == WfNode::Kind::Activity) {
    const ActivityDef& a = node.activity;
    if (!is_identifier(a.name)) bad("bad activity name '" + a.name + "'");
    if (a.name == kItemMaintenanceActivity) {
      bad("activity name 'ItemMaintenance' is reserved");
    }
    if (a.role.empty()) bad("activity '" + a.name + "' has no role");
    if (a.automatic && !a.script) {
      bad("automatic activity '" + a.name + "' has no script");
    }
    std::string path = prefix.empty() ? a.name : prefix + "/" + a.name;
    if (!paths.insert(path).second) {
      bad("duplicate activity path '" + path + "'");
    }
    ++activity_count;
    if (!node.children.empty()) bad("activity nodes have no children");
    return;
  }
  if (!node.name.empty() && !is_identifier(node.name)) {
    bad("bad composite name '" + node.name + "'");
  }
  std::string next_prefix = prefix;
  if (!node.name.empty()) {
    std::string path = prefix.empty() ? node.name : prefix + "/" + node.name;
    if (!paths.insert(path).second) bad("duplicate node path '" + path + "'");
    next_prefix = path;
  }
  if (node.children.empty()) bad("empty composite node");
  if (node.kind == WfNode::Kind::OrSplit) {
    if (!node.predicate) bad("OrSplit without predicate script");
    if (node.children.size() != 2) bad("OrSplit must have exactly two branches");
  }
  if (node.kind == WfNode::Kind::Loop) {
    if (!node.predicate) bad("Loop without predicate script");
    if (node.children.size() != 1) bad("Loop must have exactly one body");
  }
  for (const WfNode& c : node.children) {
    check_node(c, next_prefix, paths, activity_count);
  }
}

}  // namespace

void check_workflow(const WorkflowDef& def) {
  std::set<std::string> paths;
  int activity_count = 0;
  check_node(def.root, "", paths, activity_count);
  if (activity_count == 0) fail("MalformedWorkflow", "workflow has no activities");
}

namespace {

XmlNode node_to_xml(const WfNode& node) {
  XmlNode out;
  out.name = std::string(node_kind_name(node.kind));
  if (node.kind == WfNode::Kind::Activity) {
    const ActivityDef& a = node.activity;
    out.set_attr("name", a.name);
    out.set_attr("role", a.role);
    out.set_attr("automatic", a.automatic ? "true" : "false");
    if (a.outcome_schema) {
      out.set_attr("schema", a.outcome_schema->first);
      out.set_attr("schemaVersion", std::to_string(a.outcome_schema->second));
    }
    if (a.script) {
      out.set_attr("script", a.script->name);
      out.set_attr("scriptVersion", std::to_string(a.script->version));
    }
    for (const InputDecl& in : a.inputs) {
      XmlNode n;
      n.name = "Input";
      n.set_attr("collection", in.collection);
      n.set_attr("slot", std::to_string(in.slot));
      n.set_attr("schema", in.schema);
      out.children.push_back(std::move(n));
    }
    return out;
  }
  if (!node.name.empty()) out.set_attr("name", node.name);
  if (node.predicate) {
    out.set_attr("script", node.predicate->name);
    out.set_attr("scriptVersion", std::to_string(node.predicate->version));
  }
  for (const WfNode& c : node.children) {
    out.children.push_back(node_to_xml(c));
  }
  return out;
}

WfNode node_from_xml(const XmlNode& elem) {
  auto kind = node_kind_from(elem.name);
  if (!kind) {
    fail("MalformedWorkflow", "unknown node <" + elem.name + ">");
  }
  WfNode node;
  node.kind = *kind;
  if (node.kind == WfNode::Kind::Activity) {
    ActivityDef a;
    a.name = elem.attr_or("name", "");
    a.role = elem.attr_or("role", "");
    a.automatic = elem.attr_or("automatic", "false") == "true";
    if (const std::string* schema = elem.attr("schema")) {
      a.outcome_schema = {*schema, to_int(elem.attr_or("schemaVersion", "0"))};
    }
    if (const std::string* script = elem.attr("script")) {
      a.script = ScriptRef{*script, to_int(elem.attr_or("scriptVersion", "0"))};
    }
    for (const XmlNode& c : elem.children) {
      if (c.name != "Input") {
        fail("MalformedWorkflow", "unexpected <" + c.name + "> in activity");
      }
      InputDecl in;
      in.collection = c.attr_or("collection", "");
      in.slot = to_int(c.attr_or("slot", "0"));
      in.schema = c.attr_or("schema", "");
      a.inputs.push_back(std::move(in));
    }
    node.activity = std::move(a);
    return node;
  }
  node.name = elem.attr_or("name", "");
  if (const std::string* script = elem.attr("script")) {
    node.predicate = ScriptRef{*script, to_int(elem.attr_or("scriptVersion", "0"))};
  }
  for (const XmlNode& c : elem.children) {
    node.children.push_back(node_from_xml(c));
  }
  return node;
}

}  // namespace

XmlNode workflow_to_xml(const WorkflowDef& def) {
  XmlNode out;
  out.name = "Workflow";
  out.set_attr("version", std::to_string(def.version));
  out.children.push_back(node_to_xml(def.root));
  return out;
}

WorkflowDef workflow_from_xml(const XmlNode& doc) {
  if (doc.name != "Workflow") {
    fail("MalformedWorkflow", "expected <Workflow>, got <" + doc.name + ">");
  }
  if (doc.children.size() != 1) {
    fail("MalformedWorkflow", "<Workflow> must contain exactly one root node");
  }
  WorkflowDef def;
  def.version = to_int(doc.attr_or("version", "0"));
  def.root = node_from_xml(doc.children.front());
  check_workflow(def);
  return def;
}

WorkflowInstance::WorkflowInstance(WorkflowDef def) : def_(std::move(def)) {
  check_workflow(def_);
  index_nodes(def_.root, -1, "");
  composite_by_path_.emplace("", 0);  // the root is always addressable
}

int WorkflowInstance::index_nodes(const WfNode& node, int parent,
                                  const std::string& prefix) {
  int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  {
    Node& n = nodes_.back();
    n.kind = node.kind;
    n.parent = parent;
  }
  if (node.kind == WfNode::Kind::Activity) {
    std::string path =
        prefix.empty() ? node.activity.name : prefix + "/" + node.activity.name;
    nodes_[id].display_path = path;
    nodes_[id].activity = node.activity;
    leaf_by_path_.emplace(path, id);
    leaf_states_[id] = ActivityState::Waiting;
    return id;
  }
  std::string next_prefix = prefix;
  if (!node.name.empty()) {
    std::string path = prefix.empty() ? node.name : prefix + "/" + node.name;
    nodes_[id].display_path = path;
    composite_by_path_.emplace(path, id);
    next_prefix = path;
  }
  nodes_[id].predicate = node.predicate;
  for (const WfNode& c : node.children) {
    int child = index_nodes(c, id, next_prefix);
    nodes_[id].children.push_back(child);
  }
  return id;
}

WorkflowInstance::Status WorkflowInstance::status(int id) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  switch (n.kind) {
    case WfNode::Kind::Activity: {
      ActivityState s = leaf_states_.at(id);
      if (s == ActivityState::Completed) return Status::Completed;
      if (s == ActivityState::Aborted) return Status::Aborted;
      return Status::InProgress;
    }
    case WfNode::Kind::Sequence:
    case WfNode::Kind::AndSplit: {
      bool all_completed = true;
      for (int c : n.children) {
        Status s = status(c);
        if (s == Status::Aborted) return Status::Aborted;
        if (s != Status::Completed) all_completed = false;
      }
      return all_completed ? Status::Completed : Status::InProgress;
    }
    case WfNode::Kind::OrSplit: {
      auto it = or_choices_.find(id);
      if (it == or_choices_.end()) return Status::InProgress;
      return status(n.children[it->second]);
    }
    case WfNode::Kind::Loop: {
      if (loops_done_.count(id)) return Status::Completed;
      Status s = status(n.children.front());
      if (s == Status::Aborted) return Status::Aborted;
      return Status::InProgress;
    }
  }
  return Status::InProgress;
}

void WorkflowInstance::collect_active(int id, std::vector<int>& out) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  switch (n.kind) {
    case WfNode::Kind::Activity:
      if (leaf_states_.at(id) == ActivityState::Waiting) out.push_back(id);
      return;
    case WfNode::Kind::Sequence:
      for (int c : n.children) {
        Status s = status(c);
        if (s == Status::Completed) continue;
        if (s == Status::Aborted) return;
        collect_active(c, out);
        return;
      }
      return;
    case WfNode::Kind::AndSplit:
      for (int c : n.children) {
        if (status(c) == Status::InProgress) collect_active(c, out);
      }
      return;
    case WfNode::Kind::OrSplit: {
      auto it = or_choices_.find(id);
      if (it == or_choices_.end()) return;  // resolved during advance
      if (status(id) == Status::InProgress) {
        collect_active(n.children[it->second], out);
      }
      return;
    }
    case WfNode::Kind::Loop:
      if (!loops_done_.count(id) && status(id) == Status::InProgress) {
        collect_active(n.children.front(), out);
      }
      return;
  }
}

void WorkflowInstance::reset_subtree(int id) {
  const Node& n = nodes_[static_cast<size_t>(id)];
  if (n.kind == WfNode::Kind::Activity) {
    leaf_states_[id] = ActivityState::Waiting;
    return;
  }
  or_choices_.erase(id);
  loops_done_.erase(id);
  loop_iterations_.erase(id);
  for (int c : n.children) reset_subtree(c);
}

// One fixpoint step: resolve a reachable unchosen OrSplit or advance a Loop
// whose body just completed. Returns true if anything changed.
bool WorkflowInstance::resolve_step(int id, const Hooks& hooks) {
  const Node& n = nodes_[static_cast<size_t>(id)];
  switch (n.kind) {
    case WfNode::Kind::Activity:
      return false;
    case WfNode::Kind::Sequence:
      for (int c : n.children) {
        Status s = status(c);
        if (s == Status::Completed) continue;
        if (s == Status::Aborted) return false;
        return resolve_step(c, hooks);
      }
      return false;
    case WfNode::Kind::AndSplit: {
      bool changed = false;
      for (int c : n.children) {
        if (status(c) == Status::InProgress && resolve_step(c, hooks)) {
          changed = true;
        }
      }
      return changed;
    }
    case WfNode::Kind::OrSplit: {
      auto it = or_choices_.find(id);
      if (it == or_choices_.end()) {
        if (!hooks.eval_predicate) {
          fail("EvaluationError", "no predicate evaluator installed");
        }
        bool taken = hooks.eval_predicate(*n.predicate);
        or_choices_[id] = taken ? 0u : 1u;
        return true;
      }
      if (status(id) == Status::InProgress) {
        return resolve_step(n.children[it->second], hooks);
      }
      return false;
    }
    case WfNode::Kind::Loop: {
      if (loops_done_.count(id)) return false;
      int body = n.children.front();
      Status s = status(body);
      if (s == Status::InProgress) return resolve_step(body, hooks);
      if (s != Status::Completed) return false;
      if (!hooks.eval_predicate) {
        fail("EvaluationError", "no predicate evaluator installed");
      }
      if (hooks.eval_predicate(*n.predicate)) {
        reset_subtree(body);
        loop_iterations_[id] += 1;
      } else {
        loops_done_.insert(id);
      }
      return true;
    }
  }
  return false;
}

void WorkflowInstance::advance(const Hooks& hooks, int cause_event) {
  std::vector<int> before;
  collect_active(0, before);
  while (resolve_step(0, hooks)) {
  }
  std::vector<int> after;
  collect_active(0, after);
  for (int id : after) {
    if (std::find(before.begin(), before.end(), id) == before.end()) {
      activations_.push_back(
          {nodes_[static_cast<size_t>(id)].display_path, cause_event});
    }
  }
}

void WorkflowInstance::initialize(const Hooks& hooks) {
  std::vector<int> initial;
  collect_active(0, initial);
  for (int id : initial) {
    activations_.push_back({nodes_[static_cast<size_t>(id)].display_path, -1});
  }
  while (resolve_step(0, hooks)) {
  }
  std::vector<int> after;
  collect_active(0, after);
  for (int id : after) {
    if (std::find(initial.begin(), initial.end(), id) == initial.end()) {
      activations_.push_back({nodes_[static_cast<size_t>(id)].display_path, -1});
    }
  }
}

std::vector<std::string> WorkflowInstance::active_paths() const {
  std::vector<int> ids;
  collect_active(0, ids);
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(nodes_[static_cast<size_t>(id)].display_path);
  return out;
}

int WorkflowInstance::leaf_id(std::string_view path) const {
  auto it = leaf_by_path_.find(path);
  if (it == leaf_by_path_.end()) {
    fail("NoSuchActivity", "no activity at path '" + std::string(path) + "'");
  }
  return it->second;
}

bool WorkflowInstance::has_activity(std::string_view path) const {
  return leaf_by_path_.find(path) != leaf_by_path_.end();
}

bool WorkflowInstance::has_composite(std::string_view path) const {
  return composite_by_path_.find(path) != composite_by_path_.end();
}

const ActivityDef& WorkflowInstance::activity_at(std::string_view path) const {
  return nodes_[static_cast<size_t>(leaf_id(path))].activity;
}

ActivityState WorkflowInstance::state_of(std::string_view path) const {
  return leaf_states_.at(leaf_id(path));
}

std::vector<std::string> WorkflowInstance::all_activity_paths() const {
  std::vector<std::string> out;
  for (const Node& n : nodes_) {
    if (n.kind == WfNode::Kind::Activity) out.push_back(n.display_path);
  }
  return out;
}

std::vector<std::string> WorkflowInstance::non_terminal_under(
    std::string_view path) const {
  auto it = composite_by_path_.find(path);
  if (it == composite_by_path_.end()) {
    fail("NoSuchActivity", "no composite at path '" + std::string(path) + "'");
  }
  // Document order = node id order within the subtree.
  std::vector<std::string> out;
  std::vector<int> stack{it->second};
  std::vector<int> order;
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const Node& n = nodes_[static_cast<size_t>(id)];
    for (auto rit = n.children.rbegin(); rit != n.children.rend(); ++rit) {
      stack.push_back(*rit);
    }
  }
  for (int id : order) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.kind == WfNode::Kind::Activity &&
        !is_terminal(leaf_states_.at(id))) {
      out.push_back(n.display_path);
    }
  }
  return out;
}

bool WorkflowInstance::completed() const { return status(0) == Status::Completed; }

bool WorkflowInstance::aborted() const { return status(0) == Status::Aborted; }

void WorkflowInstance::fold_event(const Event& event, const Hooks& hooks) {
  int id = leaf_id(event.activity);
  leaf_states_[id] = event.target_state;
  advance(hooks, event.event_id);
}

}  // namespace cristal
