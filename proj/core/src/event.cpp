#include "cristal/event.hpp"

namespace cristal {

std::string_view to_string(ActivityState state) {
  switch (state) {
    case ActivityState::Waiting: return "Waiting";
    case ActivityState::Started: return "Started";
    case ActivityState::Suspended: return "Suspended";
    case ActivityState::Completed: return "Completed";
    case ActivityState::Aborted: return "Aborted";
  }
  return "Waiting";
}

std::string_view to_string(Transition transition) {
  switch (transition) {
    case Transition::Start: return "Start";
    case Transition::Complete: return "Complete";
    case Transition::Done: return "Done";
    case Transition::Suspend: return "Suspend";
    case Transition::Resume: return "Resume";
    case Transition::Abort: return "Abort";
  }
  return "Start";
}

std::optional<ActivityState> activity_state_from(std::string_view name) {
  if (name == "Waiting") return ActivityState::Waiting;
  if (name == "Started") return ActivityState::Started;
  if (name == "Suspended") return ActivityState::Suspended;
  if (name == "Completed") return ActivityState::Completed;
  if (name == "Aborted") return ActivityState::Aborted;
  return std::nullopt;
}

std::optional<Transition> transition_from(std::string_view name) {
  if (name == "Start") return Transition::Start;
  if (name == "Complete") return Transition::Complete;
  if (name == "Done") return Transition::Done;
  if (name == "Suspend") return Transition::Suspend;
  if (name == "Resume") return Transition::Resume;
  if (name == "Abort") return Transition::Abort;
  return std::nullopt;
}

std::optional<ActivityState> transition_target(ActivityState from,
                                               Transition transition) {
  switch (transition) {
    case Transition::Start:
      if (from == ActivityState::Waiting) return ActivityState::Started;
      return std::nullopt;
    case Transition::Complete:
      if (from == ActivityState::Started) return ActivityState::Completed;
      return std::nullopt;
    case Transition::Done:
      if (from == ActivityState::Waiting) return ActivityState::Completed;
      return std::nullopt;
    case Transition::Suspend:
      if (from == ActivityState::Started) return ActivityState::Suspended;
      return std::nullopt;
    case Transition::Resume:
      if (from == ActivityState::Suspended) return ActivityState::Started;
      return std::nullopt;
    case Transition::Abort:
      if (from == ActivityState::Waiting || from == ActivityState::Started ||
          from == ActivityState::Suspended) {
        return ActivityState::Aborted;
      }
      return std::nullopt;
  }
  return std::nullopt;
}

bool is_terminal(ActivityState state) {
  return state == ActivityState::Completed || state == ActivityState::Aborted;
}

}  // namespace cristal
