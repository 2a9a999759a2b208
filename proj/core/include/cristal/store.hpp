#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cristal/atlas.hpp"
#include "cristal/clock.hpp"
#include "cristal/event.hpp"
#include "cristal/schema.hpp"
#include "cristal/script.hpp"
#include "cristal/workflow.hpp"
#include "cristal/xml.hpp"

namespace cristal {

using Uuid = std::string;  // canonical lowercase 8-4-4-4-12 hex

bool is_canonical_uuid(std::string_view text);

struct Property {
  std::string name;
  std::string value;
  bool is_mutable = false;
};

struct SlotState {
  int slot_id = 0;
  Uuid target;  // empty when unassigned
  std::vector<std::pair<std::string, std::string>> props;
};

struct CollectionState {
  std::string name;
  std::string allowed_target_type;  // empty = unrestricted
  std::vector<SlotState> slots;
};

struct StoredOutcome {
  Uuid item;
  int event_id = 0;
  std::string schema_name;
  int schema_version = 0;
  std::string document;  // canonical single-line bytes, exactly as journaled
};

struct EventFilter {
  std::optional<std::string> activity;
  std::optional<std::string> agent;
  std::optional<std::string> schema;
  std::optional<std::pair<std::string, std::string>> time_range;  // [from, to]
};

// Built-in schema names registered at store construction.
inline constexpr std::string_view kPropertyChangeSchema = "PropertyChange";
inline constexpr std::string_view kCollectionChangeSchema = "CollectionChange";

// The full state of one item. Everything here is a pure function of the
// item's journal records; nothing is ever rewritten or deleted.
struct Item {
  Uuid uuid;
  std::string ts_created;
  std::optional<std::pair<Uuid, int>> created_from;  // (description, version)
  std::vector<Property> properties;
  std::vector<Property> creation_properties;  // values as of creation
  std::vector<CollectionState> collections;
  std::vector<Event> events;
  std::vector<long> event_seq;  // global journal rank, parallel to events
  std::string ts_workflow;
  std::map<int, StoredOutcome> outcomes;  // by event id
  std::map<std::pair<std::string, std::string>, int> viewpoints;  // (schema, view)
  std::map<std::string, int> outcome_counts;  // per schema, drives numbering
  std::optional<WorkflowInstance> workflow;

  int event_count() const { return static_cast<int>(events.size()); }
  const Property* find_property(std::string_view name) const;
  Property* find_property(std::string_view name);
  CollectionState* find_collection(std::string_view name);
  const CollectionState* find_collection(std::string_view name) const;
  std::string type_name() const;  // Type property or ""
};

// Append-only, event-sourced repository. One journal backs the whole store:
// UTF-8 text, one canonical single-line XML record per line. Mutations are
// serialized by an internal lock; history reads never block each other.
class Store {
public:
  // In-memory journal (tests); records are kept in a buffer readable via
  // journal_text().
  explicit Store(std::shared_ptr<Clock> clock = make_system_clock());

  // File-backed journal: replays the file if it exists, then appends to it.
  static Store open(const std::string& journal_path,
                    std::shared_ptr<Clock> clock = make_system_clock());
  // Replays journal text into a fresh in-memory store.
  static Store load_journal_text(std::string_view text,
                                 std::shared_ptr<Clock> clock = make_system_clock());

  Store(Store&&) = default;
  Store& operator=(Store&&) = default;

  // --- schema registry (journaled as SchemaRegistered records) ---
  std::pair<std::string, int> register_schema(const std::string& name,
                                              ElementSpec root);
  const SchemaRegistry& schemas() const { return schemas_; }

  // --- script registry (populated by ScriptDesc outcomes and built-ins) ---
  const ScriptRegistry& scripts() const { return scripts_; }

  // --- items ---
  Uuid create_item(std::optional<Uuid> uuid, std::vector<Property> properties);
  // Instantiation path: creation with a description pin and declared
  // collections.
  Uuid create_item_full(std::optional<Uuid> uuid,
                        std::vector<Property> properties,
                        std::vector<CollectionState> collections,
                        std::optional<std::pair<Uuid, int>> description);

  Event set_property(const Agent& agent, const Uuid& item,
                     const std::string& name, const std::string& value);
  // Adds a new mutable property (journaled as a PropertyChange with empty Old).
  Event add_property(const Agent& agent, const Uuid& item,
                     const std::string& name, const std::string& value);
  Event assign_slot(const Agent& agent, const Uuid& item,
                    const std::string& collection, int slot_id,
                    const Uuid& target);

  const StoredOutcome& get_outcome(const Uuid& item, std::string_view schema,
                                   std::string_view view) const;
  std::vector<Event> list_events(const Uuid& item, const EventFilter& filter) const;

  bool has_item(const Uuid& uuid) const;
  const Item& item(const Uuid& uuid) const;
  std::vector<const Item*> items_in_creation_order() const;
  size_t item_count() const { return items_.size(); }

  // --- workflow plumbing used by the lifecycle engine ---
  void assign_workflow(const Uuid& item, const WorkflowDef& def);
  // Validated events with optional outcome documents, committed and
  // journaled atomically; returns the assigned event ids.
  struct PendingEvent {
    Event event;                      // event_id filled in by the store
    std::optional<XmlNode> outcome;   // validated by the caller
  };
  std::vector<Event> commit_events(const Uuid& item,
                                   std::vector<PendingEvent> pending);

  // Script evaluation context over current state. `input_resolver` is shaped
  // by the activity's declared inputs; see lifecycle.cpp.
  ScriptContext script_context(const Uuid& item) const;
  // As-of context: only events with global rank < horizon are visible
  // (used by replay verification).
  ScriptContext script_context_at(const Uuid& item, long horizon) const;

  // --- the data atlas ---
  const Atlas& atlas() const { return atlas_; }
  std::vector<QueryHit> query_atlas(const Query& query) const;

  // --- archive ---
  std::string export_archive(std::optional<Uuid> item = std::nullopt) const;
  void import_archive(std::string_view archive_xml);

  // --- journal access ---
  const std::string& journal_text() const;  // in-memory stores only
  const std::string& journal_path() const { return journal_path_; }
  long record_count() const { return record_count_; }

  std::string now() const { return clock_->now(); }
  Clock& clock() { return *clock_; }

private:
  std::shared_ptr<Clock> clock_;
  SchemaRegistry schemas_;
  ScriptRegistry scripts_;
  Atlas atlas_;
  std::map<Uuid, Item> items_;
  std::vector<Uuid> creation_order_;
  long record_count_ = 0;
  uint64_t uuid_salt_ = 0;

  std::string journal_path_;  // empty for in-memory stores
  std::string journal_buffer_;
  std::unique_ptr<std::mutex> write_mutex_ = std::make_unique<std::mutex>();

  void register_builtins();
  void append_record_line(const std::string& line);
  Uuid generate_uuid();

  // Fold functions shared by live operations and journal replay.
  void fold_item_created(const XmlNode& record);
  void fold_workflow_assigned(const XmlNode& record);
  void fold_event_record(const XmlNode& event_record,
                         const XmlNode* outcome_record);
  void fold_schema_registered(const XmlNode& record);
  void apply_maintenance_outcome(Item& item, const XmlNode& outcome);
  void commit_outcome(Item& item, const Event& event, const XmlNode& doc);

  WorkflowInstance::Hooks instance_hooks(const Uuid& item);

  void replay_lines(std::string_view text);

  XmlNode item_created_record(const Item& item) const;
  XmlNode event_record(const Uuid& item, const Event& event) const;

  Event build_maintenance_event(const Item& item, const Agent& agent,
                                std::string_view schema) const;
};

}  // namespace cristal
