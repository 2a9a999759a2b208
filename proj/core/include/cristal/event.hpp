#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace cristal {

enum class ActivityState { Waiting, Started, Suspended, Completed, Aborted };

enum class Transition { Start, Complete, Done, Suspend, Resume, Abort };

std::string_view to_string(ActivityState state);
std::string_view to_string(Transition transition);
std::optional<ActivityState> activity_state_from(std::string_view name);
std::optional<Transition> transition_from(std::string_view name);

// The exhaustive move table. Done is the request that drives an automatic
// activity straight through; it is journaled as a Start/Complete event pair
// for workflow activities and as a single Waiting->Completed event for the
// reserved ItemMaintenance activity.
std::optional<ActivityState> transition_target(ActivityState from,
                                               Transition transition);
bool is_terminal(ActivityState state);

// The nine-field provenance record of one activity state change.
struct Event {
  int event_id = 0;               // dense per item, starting at 0
  std::string activity;           // full activity path
  ActivityState previous_state = ActivityState::Waiting;
  ActivityState target_state = ActivityState::Waiting;
  Transition transition = Transition::Start;
  std::optional<std::string> schema_name;   // set iff an outcome is attached
  std::optional<int> schema_version;
  std::string agent_name;
  std::string agent_role;
  std::string timestamp;          // ISO-8601 UTC ms

  bool has_outcome() const { return schema_name.has_value(); }
};

struct Agent {
  std::string name;
  std::set<std::string> roles;

  bool holds(std::string_view role) const {
    return roles.find(std::string(role)) != roles.end();
  }
};

// Reserved activity name for property and collection maintenance events.
inline constexpr std::string_view kItemMaintenanceActivity = "ItemMaintenance";

}  // namespace cristal
