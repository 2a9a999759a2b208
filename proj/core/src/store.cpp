#include "cristal/store.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cristal/errors.hpp"

namespace cristal {

namespace {

int to_int(const std::string& text) {
  int value = 0;
  std::from_chars(text.data(), text.data() + text.size(), value);
  return value;
}

uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string hex_uuid(uint64_t hi, uint64_t lo) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string raw(32, '0');
  for (int i = 0; i < 16; ++i) {
    raw[static_cast<size_t>(i)] = digits[(hi >> (60 - i * 4)) & 0xF];
    raw[static_cast<size_t>(16 + i)] = digits[(lo >> (60 - i * 4)) & 0xF];
  }
  raw[12] = '4';  // version nibble, for a familiar shape
  raw[16] = '8';
  return raw.substr(0, 8) + "-" + raw.substr(8, 4) + "-" + raw.substr(12, 4) +
         "-" + raw.substr(16, 4) + "-" + raw.substr(20, 12);
}

ElementSpec scalar(std::string name, ValueKind kind, int min = 1, int max = 1) {
  ElementSpec s;
  s.name = std::move(name);
  s.kind = kind;
  s.min_occurs = min;
  s.max_occurs = max;
  return s;
}

ElementSpec composite(std::string name, std::vector<ElementSpec> children,
                      int min = 1, int max = 1) {
  ElementSpec s;
  s.name = std::move(name);
  s.kind = ValueKind::Composite;
  s.min_occurs = min;
  s.max_occurs = max;
  s.children = std::move(children);
  return s;
}

ElementSpec any_subtree(std::string name, int min = 1, int max = 1) {
  ElementSpec s;
  s.name = std::move(name);
  s.kind = ValueKind::Any;
  s.min_occurs = min;
  s.max_occurs = max;
  return s;
}

AttributeSpec attr_spec(std::string name, ValueKind kind, bool required) {
  return AttributeSpec{std::move(name), kind, required};
}

}  // namespace

bool is_canonical_uuid(std::string_view text) {
  if (text.size() != 36) return false;
  for (size_t i = 0; i < text.size(); ++i) {
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (text[i] != '-') return false;
    } else if (!((text[i] >= '0' && text[i] <= '9') ||
                 (text[i] >= 'a' && text[i] <= 'f'))) {
      return false;
    }
  }
  return true;
}

const Property* Item::find_property(std::string_view name) const {
  for (const Property& p : properties) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Property* Item::find_property(std::string_view name) {
  for (Property& p : properties) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

CollectionState* Item::find_collection(std::string_view name) {
  for (CollectionState& c : collections) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const CollectionState* Item::find_collection(std::string_view name) const {
  for (const CollectionState& c : collections) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string Item::type_name() const {
  const Property* p = find_property("Type");
  return p ? p->value : "";
}

Store::Store(std::shared_ptr<Clock> clock) : clock_(std::move(clock)) {
  register_builtins();
}

void Store::register_builtins() {
  // Maintenance outcome schemas.
  schemas_.register_exact(SchemaDef{
      std::string(kPropertyChangeSchema), 0,
      composite("PropertyChange", {scalar("Name", ValueKind::String),
                                   scalar("Old", ValueKind::String),
                                   scalar("New", ValueKind::String)})});
  schemas_.register_exact(SchemaDef{
      std::string(kCollectionChangeSchema), 0,
      composite("CollectionChange", {scalar("Collection", ValueKind::String),
                                     scalar("Slot", ValueKind::Integer),
                                     scalar("Old", ValueKind::String),
                                     scalar("New", ValueKind::String)})});

  // Description content schemas. Schema and workflow documents are recursive
  // grammars, so their content roots are wildcard subtrees; the dedicated
  // parsers enforce the exact structure at create/amend time.
  {
    ElementSpec root = composite("Schema", {any_subtree("Element")});
    root.attributes = {attr_spec("name", ValueKind::String, true),
                       attr_spec("version", ValueKind::Integer, true)};
    schemas_.register_exact(SchemaDef{"SchemaDesc", 0, root});
  }
  {
    ElementSpec root = composite("Workflow", {any_subtree("*")});
    root.attributes = {attr_spec("version", ValueKind::Integer, true)};
    schemas_.register_exact(SchemaDef{"WorkflowDesc", 0, root});
  }
  {
    ElementSpec input = scalar("Input", ValueKind::String, 0, kUnbounded);
    input.attributes = {attr_spec("collection", ValueKind::String, true),
                        attr_spec("slot", ValueKind::Integer, true),
                        attr_spec("schema", ValueKind::String, true)};
    ElementSpec root = composite("Activity", {std::move(input)});
    root.children.front().min_occurs = 0;
    root.attributes = {attr_spec("name", ValueKind::String, true),
                       attr_spec("role", ValueKind::String, true),
                       attr_spec("automatic", ValueKind::Boolean, true),
                       attr_spec("schema", ValueKind::String, false),
                       attr_spec("schemaVersion", ValueKind::Integer, false),
                       attr_spec("script", ValueKind::String, false),
                       attr_spec("scriptVersion", ValueKind::Integer, false)};
    schemas_.register_exact(SchemaDef{"ActivityDesc", 0, root});
  }
  {
    ElementSpec root = scalar("Script", ValueKind::String);
    root.attributes = {attr_spec("name", ValueKind::String, true),
                       attr_spec("version", ValueKind::Integer, true)};
    schemas_.register_exact(SchemaDef{"ScriptDesc", 0, root});
  }
  {
    ElementSpec prop = scalar("PropertyDef", ValueKind::String, 0, kUnbounded);
    prop.attributes = {attr_spec("name", ValueKind::String, true),
                       attr_spec("default", ValueKind::String, true),
                       attr_spec("mutable", ValueKind::Boolean, true)};
    ElementSpec coll = scalar("CollectionDef", ValueKind::String, 0, kUnbounded);
    coll.attributes = {attr_spec("name", ValueKind::String, true),
                       attr_spec("slots", ValueKind::Integer, true),
                       attr_spec("targetType", ValueKind::String, true)};
    ElementSpec root =
        composite("ItemDescription", {std::move(prop), std::move(coll)});
    root.attributes = {attr_spec("type", ValueKind::String, true),
                       attr_spec("workflow", ValueKind::String, true),
                       attr_spec("workflowVersion", ValueKind::Integer, true)};
    schemas_.register_exact(SchemaDef{"ItemDesc", 0, root});
  }

  // Reserved scripts: "true" backs the description loop predicate; "amend" is
  // the marker script of the Amend activity, driven by the description engine
  // rather than by evaluation.
  scripts_.register_exact("true", 0, "true");
  scripts_.register_exact("amend", 0, "true");
}

Store Store::open(const std::string& journal_path, std::shared_ptr<Clock> clock) {
  Store store(std::move(clock));
  store.journal_path_ = journal_path;
  std::error_code ec;
  if (std::filesystem::exists(journal_path, ec)) {
    std::ifstream in(journal_path, std::ios::binary);
    if (!in) fail("CorruptJournal", "cannot open journal " + journal_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    store.journal_buffer_ = buf.str();
    store.replay_lines(store.journal_buffer_);
  }
  return store;
}

Store Store::load_journal_text(std::string_view text,
                               std::shared_ptr<Clock> clock) {
  Store store(std::move(clock));
  store.journal_buffer_ = std::string(text);
  store.replay_lines(store.journal_buffer_);
  return store;
}

const std::string& Store::journal_text() const { return journal_buffer_; }

void Store::append_record_line(const std::string& line) {
  journal_buffer_ += line;
  journal_buffer_ += '\n';
  if (!journal_path_.empty()) {
    std::ofstream out(journal_path_, std::ios::binary | std::ios::app);
    if (!out) fail("CorruptJournal", "cannot append to " + journal_path_);
    out << line << '\n';
    out.flush();
  }
}

Uuid Store::generate_uuid() {
  // Deterministic given the journal state, so fixed-clock reruns yield
  // byte-identical journals.
  for (;;) {
    uint64_t s = 0xC0FFEEULL ^ (static_cast<uint64_t>(record_count_) << 20) ^
                 (static_cast<uint64_t>(items_.size()) << 4) ^ uuid_salt_++;
    uint64_t hi = splitmix64(s);
    uint64_t lo = splitmix64(s);
    Uuid uuid = hex_uuid(hi, lo);
    if (!items_.count(uuid)) return uuid;
  }
}

// ---------------------------------------------------------------------------
// Record builders
// ---------------------------------------------------------------------------

namespace {

XmlNode collection_to_xml(const CollectionState& c) {
  XmlNode n;
  n.name = "Collection";
  n.set_attr("name", c.name);
  n.set_attr("targetType", c.allowed_target_type);
  n.set_attr("slots", std::to_string(c.slots.size()));
  for (const SlotState& s : c.slots) {
    if (s.props.empty()) continue;
    XmlNode sn;
    sn.name = "Slot";
    sn.set_attr("id", std::to_string(s.slot_id));
    for (const auto& [k, v] : s.props) {
      XmlNode pn;
      pn.name = "Prop";
      pn.set_attr("name", k);
      pn.set_attr("value", v);
      sn.children.push_back(std::move(pn));
    }
    n.children.push_back(std::move(sn));
  }
  return n;
}

CollectionState collection_from_xml(const XmlNode& n) {
  CollectionState c;
  c.name = n.attr_or("name", "");
  c.allowed_target_type = n.attr_or("targetType", "");
  int slots = to_int(n.attr_or("slots", "0"));
  c.slots.resize(static_cast<size_t>(std::max(slots, 0)));
  for (size_t i = 0; i < c.slots.size(); ++i) {
    c.slots[i].slot_id = static_cast<int>(i);
  }
  for (const XmlNode& sn : n.children) {
    if (sn.name != "Slot") continue;
    int id = to_int(sn.attr_or("id", "0"));
    if (id < 0 || id >= static_cast<int>(c.slots.size())) continue;
    for (const XmlNode& pn : sn.children) {
      c.slots[static_cast<size_t>(id)].props.emplace_back(
          pn.attr_or("name", ""), pn.attr_or("value", ""));
    }
  }
  return c;
}

}  // namespace

XmlNode Store::item_created_record(const Item& item) const {
  XmlNode rec;
  rec.name = "ItemCreated";
  rec.set_attr("uuid", item.uuid);
  rec.set_attr("ts", item.ts_created);
  if (item.created_from) {
    rec.set_attr("desc", item.created_from->first);
    rec.set_attr("descVersion", std::to_string(item.created_from->second));
  }
  for (const Property& p : item.creation_properties) {
    XmlNode pn;
    pn.name = "Property";
    pn.set_attr("name", p.name);
    pn.set_attr("value", p.value);
    pn.set_attr("mutable", p.is_mutable ? "true" : "false");
    rec.children.push_back(std::move(pn));
  }
  for (const CollectionState& c : item.collections) {
    CollectionState initial = c;
    for (SlotState& s : initial.slots) s.target.clear();
    rec.children.push_back(collection_to_xml(initial));
  }
  return rec;
}

XmlNode Store::event_record(const Uuid& item, const Event& event) const {
  XmlNode rec;
  rec.name = "Event";
  rec.set_attr("id", std::to_string(event.event_id));
  rec.set_attr("item", item);
  rec.set_attr("activity", event.activity);
  rec.set_attr("prev", to_string(event.previous_state));
  rec.set_attr("target", to_string(event.target_state));
  rec.set_attr("transition", to_string(event.transition));
  if (event.schema_name) {
    rec.set_attr("schema", *event.schema_name);
    rec.set_attr("schemaVersion", std::to_string(*event.schema_version));
  }
  rec.set_attr("agent", event.agent_name);
  rec.set_attr("role", event.agent_role);
  rec.set_attr("ts", event.timestamp);
  return rec;
}

// ---------------------------------------------------------------------------
// Folds (shared by live operations, journal replay, and archive import)
// ---------------------------------------------------------------------------

void Store::fold_item_created(const XmlNode& record) {
  Item item;
  item.uuid = record.attr_or("uuid", "");
  item.ts_created = record.attr_or("ts", "");
  if (!is_canonical_uuid(item.uuid)) {
    fail("CorruptJournal", "bad uuid in ItemCreated: '" + item.uuid + "'");
  }
  if (items_.count(item.uuid)) {
    fail("DuplicateUuid", "item " + item.uuid + " already exists");
  }
  if (const std::string* desc = record.attr("desc")) {
    item.created_from = {{*desc, to_int(record.attr_or("descVersion", "0"))}};
  }
  for (const XmlNode& child : record.children) {
    if (child.name == "Property") {
      item.properties.push_back(Property{child.attr_or("name", ""),
                                         child.attr_or("value", ""),
                                         child.attr_or("mutable", "false") ==
                                             "true"});
    } else if (child.name == "Collection") {
      item.collections.push_back(collection_from_xml(child));
    }
  }
  item.creation_properties = item.properties;
  creation_order_.push_back(item.uuid);
  items_.emplace(item.uuid, std::move(item));
  ++record_count_;
}

void Store::fold_workflow_assigned(const XmlNode& record) {
  const std::string uuid = record.attr_or("item", "");
  auto it = items_.find(uuid);
  if (it == items_.end()) {
    fail("UnknownItem", "WorkflowAssigned for unknown item " + uuid);
  }
  Item& item = it->second;
  if (item.workflow) {
    fail("WorkflowAlreadyAssigned", "item " + uuid + " already has a workflow");
  }
  if (record.children.size() != 1) {
    fail("CorruptJournal", "WorkflowAssigned must carry one workflow document");
  }
  WorkflowDef def = workflow_from_xml(record.children.front());
  WorkflowInstance instance(std::move(def));
  WorkflowInstance::Hooks hooks = instance_hooks(uuid);
  instance.initialize(hooks);
  item.ts_workflow = record.attr_or("ts", "");
  item.workflow = std::move(instance);
  ++record_count_;
}

void Store::fold_schema_registered(const XmlNode& record) {
  if (record.children.size() != 1) {
    fail("CorruptJournal", "SchemaRegistered must carry one schema document");
  }
  SchemaDef def = schema_from_xml(record.children.front());
  if (def.name != record.attr_or("name", "") ||
      def.version != to_int(record.attr_or("version", "-1"))) {
    fail("CorruptJournal", "SchemaRegistered attributes disagree with payload");
  }
  schemas_.register_exact(def);
  ++record_count_;
}

void Store::apply_maintenance_outcome(Item& item, const XmlNode& outcome) {
  if (outcome.name == kPropertyChangeSchema) {
    const XmlNode* name = outcome.child("Name");
    const XmlNode* old_value = outcome.child("Old");
    const XmlNode* new_value = outcome.child("New");
    if (!name || !old_value || !new_value) {
      fail("CorruptJournal", "bad PropertyChange payload");
    }
    if (Property* p = item.find_property(name->text)) {
      p->value = new_value->text;
    } else if (old_value->text.empty()) {
      item.properties.push_back(Property{name->text, new_value->text, true});
    } else {
      fail("CorruptJournal", "PropertyChange for unknown property '" +
                                 name->text + "'");
    }
    return;
  }
  if (outcome.name == kCollectionChangeSchema) {
    const XmlNode* coll = outcome.child("Collection");
    const XmlNode* slot = outcome.child("Slot");
    const XmlNode* new_value = outcome.child("New");
    if (!coll || !slot || !new_value) {
      fail("CorruptJournal", "bad CollectionChange payload");
    }
    CollectionState* c = item.find_collection(coll->text);
    if (!c) {
      fail("CorruptJournal", "CollectionChange for unknown collection '" +
                                 coll->text + "'");
    }
    int id = to_int(slot->text);
    if (id < 0 || id >= static_cast<int>(c->slots.size())) {
      fail("CorruptJournal", "CollectionChange for unknown slot " + slot->text);
    }
    c->slots[static_cast<size_t>(id)].target = new_value->text;
    return;
  }
  fail("CorruptJournal", "unknown maintenance outcome <" + outcome.name + ">");
}

void Store::commit_outcome(Item& item, const Event& event, const XmlNode& doc) {
  StoredOutcome outcome;
  outcome.item = item.uuid;
  outcome.event_id = event.event_id;
  outcome.schema_name = *event.schema_name;
  outcome.schema_version = *event.schema_version;
  outcome.document = to_canonical_xml(doc);
  item.outcomes.emplace(event.event_id, std::move(outcome));
  int number = item.outcome_counts[*event.schema_name]++;
  item.viewpoints[{*event.schema_name, std::to_string(number)}] = event.event_id;
  item.viewpoints[{*event.schema_name, "last"}] = event.event_id;
}

void Store::fold_event_record(const XmlNode& event_record,
                              const XmlNode* outcome_record) {
  const std::string uuid = event_record.attr_or("item", "");
  auto it = items_.find(uuid);
  if (it == items_.end()) {
    fail("UnknownItem", "event for unknown item " + uuid);
  }
  Item& item = it->second;

  Event event;
  event.event_id = to_int(event_record.attr_or("id", "-1"));
  event.activity = event_record.attr_or("activity", "");
  auto prev = activity_state_from(event_record.attr_or("prev", ""));
  auto target = activity_state_from(event_record.attr_or("target", ""));
  auto transition = transition_from(event_record.attr_or("transition", ""));
  if (!prev || !target || !transition) {
    fail("CorruptJournal", "bad event states/transition");
  }
  event.previous_state = *prev;
  event.target_state = *target;
  event.transition = *transition;
  if (const std::string* schema = event_record.attr("schema")) {
    event.schema_name = *schema;
    event.schema_version = to_int(event_record.attr_or("schemaVersion", "0"));
  }
  event.agent_name = event_record.attr_or("agent", "");
  event.agent_role = event_record.attr_or("role", "");
  event.timestamp = event_record.attr_or("ts", "");

  if (event.event_id != item.event_count()) {
    fail("CorruptJournal", "event id " + std::to_string(event.event_id) +
                               " breaks density for item " + uuid);
  }
  if (event.has_outcome() && !outcome_record) {
    fail("CorruptJournal", "event with outcome schema has no outcome record");
  }
  if (!event.has_outcome() && outcome_record) {
    fail("OutcomeWithoutEvent", "outcome attached to an event without schema");
  }

  long seq = record_count_;
  item.events.push_back(event);
  item.event_seq.push_back(seq);
  ++record_count_;  // event line

  std::optional<XmlNode> outcome_doc;
  if (outcome_record) {
    if (outcome_record->attr_or("item", "") != uuid ||
        to_int(outcome_record->attr_or("event", "-1")) != event.event_id) {
      fail("OutcomeWithoutEvent",
           "outcome record does not match the preceding event");
    }
    if (outcome_record->children.size() != 1) {
      fail("CorruptJournal", "outcome record must carry one document");
    }
    outcome_doc = outcome_record->children.front();
    commit_outcome(item, event, *outcome_doc);
    ++record_count_;  // outcome line
  }

  if (event.activity == kItemMaintenanceActivity) {
    apply_maintenance_outcome(item, *outcome_doc);
  } else {
    if (!item.workflow) {
      fail("CorruptJournal", "workflow event for item without workflow");
    }
    WorkflowInstance::Hooks hooks = instance_hooks(uuid);
    item.workflow->fold_event(event, hooks);
  }

  if (outcome_doc) {
    if (*event.schema_name == "ScriptDesc") {
      scripts_.register_exact(outcome_doc->attr_or("name", ""),
                              to_int(outcome_doc->attr_or("version", "0")),
                              outcome_doc->text);
    }
    atlas_.index_outcome(uuid, event.event_id,
                         schemas_.get(*event.schema_name, *event.schema_version),
                         *outcome_doc, item.type_name());
  }
}

void Store::replay_lines(std::string_view text) {
  size_t pos = 0;
  long line_no = 1;
  std::vector<std::pair<XmlNode, long>> records;  // (record, line number)
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      fail("CorruptJournal", "torn final record at offset " +
                                 std::to_string(pos) + " (line " +
                                 std::to_string(line_no) + ")");
    }
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty()) {
      XmlParseError err;
      auto node = try_parse_xml(line, &err);
      if (!node) {
        fail("CorruptJournal", "line " + std::to_string(line_no) + ": " +
                                   err.message);
      }
      records.emplace_back(*std::move(node), line_no);
    }
    pos = nl + 1;
    ++line_no;
  }

  for (size_t i = 0; i < records.size(); ++i) {
    const XmlNode& rec = records[i].first;
    long line = records[i].second;
    try {
      if (rec.name == "ItemCreated") {
        fold_item_created(rec);
      } else if (rec.name == "WorkflowAssigned") {
        fold_workflow_assigned(rec);
      } else if (rec.name == "SchemaRegistered") {
        fold_schema_registered(rec);
      } else if (rec.name == "Event") {
        const XmlNode* outcome = nullptr;
        if (i + 1 < records.size() && records[i + 1].first.name == "Outcome") {
          outcome = &records[i + 1].first;
          ++i;
        }
        fold_event_record(rec, outcome);
      } else if (rec.name == "Outcome") {
        fail("OutcomeWithoutEvent",
             "outcome record does not follow its event");
      } else {
        fail("CorruptJournal", "unknown record <" + rec.name + ">");
      }
    } catch (const Error& e) {
      if (e.name() == "CorruptJournal" || e.name() == "OutcomeWithoutEvent") {
        throw;
      }
      fail("CorruptJournal",
           "line " + std::to_string(line) + ": " + e.name() + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

std::pair<std::string, int> Store::register_schema(const std::string& name,
                                                   ElementSpec root) {
  std::lock_guard lock(*write_mutex_);
  check_element_spec(root);
  int version = schemas_.version_count(name);
  SchemaDef def{name, version, std::move(root)};
  XmlNode rec;
  rec.name = "SchemaRegistered";
  rec.set_attr("name", name);
  rec.set_attr("version", std::to_string(version));
  rec.children.push_back(schema_to_xml(def));
  fold_schema_registered(rec);
  append_record_line(to_canonical_xml(rec));
  return {name, version};
}

Uuid Store::create_item(std::optional<Uuid> uuid,
                        std::vector<Property> properties) {
  return create_item_full(std::move(uuid), std::move(properties), {},
                          std::nullopt);
}

Uuid Store::create_item_full(std::optional<Uuid> uuid,
                             std::vector<Property> properties,
                             std::vector<CollectionState> collections,
                             std::optional<std::pair<Uuid, int>> description) {
  std::lock_guard lock(*write_mutex_);
  Uuid id;
  if (uuid) {
    if (!is_canonical_uuid(*uuid)) {
      fail("BadUuid", "not a canonical uuid: '" + *uuid + "'");
    }
    if (items_.count(*uuid)) {
      fail("DuplicateUuid", "item " + *uuid + " already exists");
    }
    id = *uuid;
  } else {
    id = generate_uuid();
  }
  Item staged;
  staged.uuid = id;
  staged.ts_created = clock_->now();
  staged.created_from = std::move(description);
  staged.properties = std::move(properties);
  staged.creation_properties = staged.properties;
  staged.collections = std::move(collections);
  XmlNode rec = item_created_record(staged);
  fold_item_created(rec);
  append_record_line(to_canonical_xml(rec));
  return id;
}

void Store::assign_workflow(const Uuid& uuid, const WorkflowDef& def) {
  std::lock_guard lock(*write_mutex_);
  if (!items_.count(uuid)) fail("UnknownItem", "no item " + uuid);
  XmlNode rec;
  rec.name = "WorkflowAssigned";
  rec.set_attr("item", uuid);
  rec.set_attr("version", std::to_string(def.version));
  rec.set_attr("ts", clock_->now());
  rec.children.push_back(workflow_to_xml(def));
  fold_workflow_assigned(rec);
  append_record_line(to_canonical_xml(rec));
}

std::vector<Event> Store::commit_events(const Uuid& uuid,
                                        std::vector<PendingEvent> pending) {
  std::lock_guard lock(*write_mutex_);
  auto it = items_.find(uuid);
  if (it == items_.end()) fail("UnknownItem", "no item " + uuid);
  Item& item = it->second;

  std::vector<std::string> lines;
  std::vector<Event> committed;
  std::vector<std::optional<XmlNode>> outcome_docs;
  std::vector<long> seqs;
  long next_seq = record_count_;
  for (PendingEvent& p : pending) {
    p.event.event_id = item.event_count() + static_cast<int>(committed.size());
    committed.push_back(p.event);
    seqs.push_back(next_seq++);
    lines.push_back(to_canonical_xml(event_record(uuid, p.event)));
    if (p.outcome) {
      XmlNode orec;
      orec.name = "Outcome";
      orec.set_attr("item", uuid);
      orec.set_attr("event", std::to_string(p.event.event_id));
      orec.children.push_back(*p.outcome);
      lines.push_back(to_canonical_xml(orec));
      ++next_seq;
    }
    outcome_docs.push_back(std::move(p.outcome));
  }

  // Folds run against a copy of the workflow instance; the outcome/event
  // bookkeeping on the item is undone on failure. A rejected request must
  // leave both the state and the journal untouched.
  std::optional<WorkflowInstance> staged_workflow;
  bool touches_workflow =
      std::any_of(committed.begin(), committed.end(), [](const Event& e) {
        return e.activity != kItemMaintenanceActivity;
      });
  if (touches_workflow) {
    if (!item.workflow) fail("NoWorkflow", "item " + uuid + " has no workflow");
    staged_workflow = *item.workflow;
  }

  size_t item_side = 0;  // events whose bookkeeping reached the item
  try {
    for (size_t i = 0; i < committed.size(); ++i) {
      const Event& event = committed[i];
      item.events.push_back(event);
      item.event_seq.push_back(seqs[i]);
      if (outcome_docs[i]) commit_outcome(item, event, *outcome_docs[i]);
      ++item_side;
      if (event.activity == kItemMaintenanceActivity) {
        apply_maintenance_outcome(item, *outcome_docs[i]);
      } else {
        WorkflowInstance::Hooks hooks = instance_hooks(uuid);
        staged_workflow->fold_event(event, hooks);
      }
    }
  } catch (...) {
    while (item_side-- > 0) {
      const Event& event = committed[item_side];
      if (outcome_docs[item_side]) {
        const std::string& schema = *event.schema_name;
        item.outcomes.erase(event.event_id);
        int number = --item.outcome_counts[schema];
        item.viewpoints.erase({schema, std::to_string(number)});
        if (number > 0) {
          item.viewpoints[{schema, "last"}] =
              item.viewpoints.at({schema, std::to_string(number - 1)});
        } else {
          item.viewpoints.erase({schema, "last"});
          item.outcome_counts.erase(schema);
        }
      }
      item.events.pop_back();
      item.event_seq.pop_back();
    }
    throw;
  }

  if (staged_workflow) item.workflow = std::move(*staged_workflow);

  for (size_t i = 0; i < committed.size(); ++i) {
    if (outcome_docs[i]) {
      const Event& event = committed[i];
      if (*event.schema_name == "ScriptDesc") {
        scripts_.register_exact(outcome_docs[i]->attr_or("name", ""),
                                to_int(outcome_docs[i]->attr_or("version", "0")),
                                outcome_docs[i]->text);
      }
      atlas_.index_outcome(
          uuid, event.event_id,
          schemas_.get(*event.schema_name, *event.schema_version),
          *outcome_docs[i], item.type_name());
    }
  }
  record_count_ = next_seq;
  for (const std::string& line : lines) append_record_line(line);
  return committed;
}

Event Store::build_maintenance_event(const Item& item, const Agent& agent,
                                     std::string_view schema) const {
  Event event;
  event.event_id = item.event_count();
  event.activity = std::string(kItemMaintenanceActivity);
  event.previous_state = ActivityState::Waiting;
  event.target_state = ActivityState::Completed;
  event.transition = Transition::Done;
  event.schema_name = std::string(schema);
  event.schema_version = 0;
  event.agent_name = agent.name;
  event.agent_role = agent.roles.empty() ? "" : *agent.roles.begin();
  event.timestamp = clock_->now();
  return event;
}

namespace {

XmlNode property_change_doc(const std::string& name, const std::string& old_value,
                            const std::string& new_value) {
  XmlNode doc;
  doc.name = "PropertyChange";
  XmlNode n;
  n.name = "Name";
  n.text = name;
  XmlNode o;
  o.name = "Old";
  o.text = old_value;
  XmlNode w;
  w.name = "New";
  w.text = new_value;
  doc.children = {std::move(n), std::move(o), std::move(w)};
  return doc;
}

}  // namespace

Event Store::set_property(const Agent& agent, const Uuid& uuid,
                          const std::string& name, const std::string& value) {
  const Item& item = this->item(uuid);
  const Property* p = item.find_property(name);
  if (!p) fail("UnknownProperty", "item has no property '" + name + "'");
  if (!p->is_mutable) fail("ImmutableProperty", "property '" + name +
                                                     "' is immutable");
  PendingEvent pending;
  pending.event = build_maintenance_event(item, agent, kPropertyChangeSchema);
  pending.outcome = property_change_doc(name, p->value, value);
  return commit_events(uuid, {std::move(pending)}).front();
}

Event Store::add_property(const Agent& agent, const Uuid& uuid,
                          const std::string& name, const std::string& value) {
  const Item& item = this->item(uuid);
  if (item.find_property(name)) {
    fail("DuplicateProperty", "item already has property '" + name + "'");
  }
  PendingEvent pending;
  pending.event = build_maintenance_event(item, agent, kPropertyChangeSchema);
  pending.outcome = property_change_doc(name, "", value);
  return commit_events(uuid, {std::move(pending)}).front();
}

Event Store::assign_slot(const Agent& agent, const Uuid& uuid,
                         const std::string& collection, int slot_id,
                         const Uuid& target) {
  const Item& item = this->item(uuid);
  const CollectionState* c = item.find_collection(collection);
  if (!c) fail("UnknownCollection", "item has no collection '" + collection + "'");
  if (slot_id < 0 || slot_id >= static_cast<int>(c->slots.size())) {
    fail("UnknownSlot", collection + " has no slot " + std::to_string(slot_id));
  }
  auto target_it = items_.find(target);
  if (target_it == items_.end()) {
    fail("UnknownTarget", "no item " + target);
  }
  if (!c->allowed_target_type.empty() &&
      target_it->second.type_name() != c->allowed_target_type) {
    fail("TargetTypeMismatch", "collection '" + collection + "' only accepts " +
                                   c->allowed_target_type);
  }
  XmlNode doc;
  doc.name = "CollectionChange";
  XmlNode cn;
  cn.name = "Collection";
  cn.text = collection;
  XmlNode sn;
  sn.name = "Slot";
  sn.text = std::to_string(slot_id);
  XmlNode on;
  on.name = "Old";
  on.text = c->slots[static_cast<size_t>(slot_id)].target;
  XmlNode nn;
  nn.name = "New";
  nn.text = target;
  doc.children = {std::move(cn), std::move(sn), std::move(on), std::move(nn)};

  PendingEvent pending;
  pending.event = build_maintenance_event(item, agent, kCollectionChangeSchema);
  pending.outcome = std::move(doc);
  return commit_events(uuid, {std::move(pending)}).front();
}

const StoredOutcome& Store::get_outcome(const Uuid& uuid,
                                        std::string_view schema,
                                        std::string_view view) const {
  const Item& item = this->item(uuid);
  auto it = item.viewpoints.find({std::string(schema), std::string(view)});
  if (it == item.viewpoints.end()) {
    fail("UnknownViewpoint", "item has no viewpoint (" + std::string(schema) +
                                 ", " + std::string(view) + ")");
  }
  return item.outcomes.at(it->second);
}

std::vector<Event> Store::list_events(const Uuid& uuid,
                                      const EventFilter& filter) const {
  const Item& item = this->item(uuid);
  std::vector<Event> out;
  for (const Event& e : item.events) {
    if (filter.activity && e.activity != *filter.activity) continue;
    if (filter.agent && e.agent_name != *filter.agent) continue;
    if (filter.schema && (!e.schema_name || *e.schema_name != *filter.schema)) {
      continue;
    }
    if (filter.time_range) {
      if (e.timestamp < filter.time_range->first ||
          e.timestamp > filter.time_range->second) {
        continue;
      }
    }
    out.push_back(e);
  }
  return out;
}

bool Store::has_item(const Uuid& uuid) const { return items_.count(uuid) > 0; }

const Item& Store::item(const Uuid& uuid) const {
  auto it = items_.find(uuid);
  if (it == items_.end()) fail("UnknownItem", "no item " + uuid);
  return it->second;
}

std::vector<const Item*> Store::items_in_creation_order() const {
  std::vector<const Item*> out;
  out.reserve(creation_order_.size());
  for (const Uuid& uuid : creation_order_) out.push_back(&items_.at(uuid));
  return out;
}

std::vector<QueryHit> Store::query_atlas(const Query& query) const {
  return atlas_.query(query, schemas_);
}

// ---------------------------------------------------------------------------
// Archive
// ---------------------------------------------------------------------------

std::string Store::export_archive(std::optional<Uuid> scope) const {
  std::vector<const Item*> included;
  std::set<std::pair<std::string, int>> schema_refs;
  bool full = !scope.has_value();

  if (full) {
    included = items_in_creation_order();
    for (const std::string& name : schemas_.names()) {
      int count = schemas_.version_count(name);
      for (int v = 0; v < count; ++v) schema_refs.insert({name, v});
    }
  } else {
    // The item plus every description version it references, transitively.
    std::set<Uuid> wanted;
    std::vector<Uuid> queue{*scope};
    while (!queue.empty()) {
      Uuid uuid = queue.back();
      queue.pop_back();
      if (!wanted.insert(uuid).second) continue;
      const Item& it = item(uuid);
      if (it.created_from) queue.push_back(it.created_from->first);
      for (const auto& [event_id, outcome] : it.outcomes) {
        (void)event_id;
        schema_refs.insert({outcome.schema_name, outcome.schema_version});
        if (outcome.schema_name == "ItemDesc") {
          XmlNode content = parse_xml(outcome.document);
          if (const std::string* wf = content.attr("workflow")) {
            if (has_item(*wf)) queue.push_back(*wf);
          }
        }
      }
    }
    for (const Item* it : items_in_creation_order()) {
      if (wanted.count(it->uuid)) included.push_back(it);
    }
    // Built-ins travel with every archive.
    for (std::string_view name :
         {kPropertyChangeSchema, kCollectionChangeSchema}) {
      schema_refs.insert({std::string(name), 0});
    }
    for (const char* name :
         {"SchemaDesc", "WorkflowDesc", "ActivityDesc", "ScriptDesc",
          "ItemDesc"}) {
      schema_refs.insert({name, 0});
    }
  }

  XmlNode archive;
  archive.name = "Archive";
  XmlNode schemas_node;
  schemas_node.name = "Schemas";
  for (const auto& [name, version] : schema_refs) {
    if (!schemas_.has(name, version)) continue;
    schemas_node.children.push_back(schema_to_xml(schemas_.get(name, version)));
  }
  archive.children.push_back(std::move(schemas_node));

  // Dense global ranks for the included events, preserving journal order.
  std::vector<std::pair<long, std::pair<const Item*, size_t>>> ordered;
  for (const Item* it : included) {
    for (size_t i = 0; i < it->events.size(); ++i) {
      ordered.push_back({it->event_seq[i], {it, i}});
    }
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::map<std::pair<const Item*, size_t>, long> rank;
  for (size_t i = 0; i < ordered.size(); ++i) {
    rank[ordered[i].second] = static_cast<long>(i);
  }

  XmlNode items_node;
  items_node.name = "Items";
  for (const Item* it : included) {
    XmlNode item_node = item_created_record(*it);
    item_node.name = "Item";
    if (it->workflow) {
      XmlNode wf;
      wf.name = "WorkflowAssigned";
      wf.set_attr("version", std::to_string(it->workflow->version()));
      wf.set_attr("ts", it->ts_workflow);
      wf.children.push_back(workflow_to_xml(it->workflow->def()));
      item_node.children.push_back(std::move(wf));
    }
    for (size_t i = 0; i < it->events.size(); ++i) {
      const Event& e = it->events[i];
      XmlNode ev;
      ev.name = "Event";
      ev.set_attr("id", std::to_string(e.event_id));
      ev.set_attr("seq", std::to_string(rank.at({it, i})));
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
      item_node.children.push_back(std::move(ev));
      auto oit = it->outcomes.find(e.event_id);
      if (oit != it->outcomes.end()) {
        XmlNode on;
        on.name = "Outcome";
        on.set_attr("event", std::to_string(e.event_id));
        on.children.push_back(parse_xml(oit->second.document));
        item_node.children.push_back(std::move(on));
      }
    }
    items_node.children.push_back(std::move(item_node));
  }
  archive.children.push_back(std::move(items_node));
  return to_pretty_xml(archive);
}

void Store::import_archive(std::string_view archive_xml) {
  XmlNode archive = parse_xml(archive_xml);
  if (archive.name != "Archive") {
    fail("MalformedArchive", "expected <Archive>, got <" + archive.name + ">");
  }
  std::lock_guard lock(*write_mutex_);

  if (const XmlNode* schemas_node = archive.child("Schemas")) {
    for (const XmlNode& schema_node : schemas_node->children) {
      SchemaDef def = schema_from_xml(schema_node);
      if (schemas_.has(def.name, def.version)) {
        schemas_.register_exact(def);  // verifies identical content
        continue;
      }
      XmlNode rec;
      rec.name = "SchemaRegistered";
      rec.set_attr("name", def.name);
      rec.set_attr("version", std::to_string(def.version));
      rec.children.push_back(schema_node);
      fold_schema_registered(rec);
      append_record_line(to_canonical_xml(rec));
    }
  }

  struct PendingArchiveEvent {
    long seq;
    Uuid item;
    const XmlNode* event;
    const XmlNode* outcome;
  };
  std::vector<PendingArchiveEvent> events;

  const XmlNode* items_node = archive.child("Items");
  if (items_node) {
    for (const XmlNode& item_node : items_node->children) {
      if (item_node.name != "Item") {
        fail("MalformedArchive", "unexpected <" + item_node.name + "> in Items");
      }
      Uuid uuid = item_node.attr_or("uuid", "");
      XmlNode created;
      created.name = "ItemCreated";
      created.attrs = item_node.attrs;
      const XmlNode* workflow_node = nullptr;
      for (size_t i = 0; i < item_node.children.size(); ++i) {
        const XmlNode& child = item_node.children[i];
        if (child.name == "Property" || child.name == "Collection") {
          created.children.push_back(child);
        } else if (child.name == "WorkflowAssigned") {
          workflow_node = &child;
        } else if (child.name == "Event") {
          const XmlNode* outcome = nullptr;
          if (i + 1 < item_node.children.size() &&
              item_node.children[i + 1].name == "Outcome") {
            outcome = &item_node.children[i + 1];
          }
          long seq = 0;
          const std::string seq_text = child.attr_or("seq", "");
          if (!lex_integer(seq_text)) {
            fail("MalformedArchive", "event without a seq rank");
          }
          seq = std::stol(seq_text);
          events.push_back({seq, uuid, &child, outcome});
        }
      }
      fold_item_created(created);
      append_record_line(to_canonical_xml(created));
      if (workflow_node) {
        if (workflow_node->children.size() != 1) {
          fail("MalformedArchive", "WorkflowAssigned must carry one document");
        }
        XmlNode rec;
        rec.name = "WorkflowAssigned";
        rec.set_attr("item", uuid);
        rec.set_attr("version", workflow_node->attr_or("version", "0"));
        rec.set_attr("ts", workflow_node->attr_or("ts", ""));
        rec.children.push_back(workflow_node->children.front());
        fold_workflow_assigned(rec);
        append_record_line(to_canonical_xml(rec));
      }
    }
  }

  std::sort(events.begin(), events.end(),
            [](const PendingArchiveEvent& a, const PendingArchiveEvent& b) {
              return a.seq < b.seq;
            });
  for (const PendingArchiveEvent& p : events) {
    XmlNode rec;
    rec.name = "Event";
    rec.set_attr("id", p.event->attr_or("id", ""));
    rec.set_attr("item", p.item);
    for (const auto& [k, v] : p.event->attrs) {
      if (k == "id" || k == "seq") continue;
      rec.set_attr(k, v);
    }
    std::optional<XmlNode> outcome_rec;
    if (p.outcome) {
      XmlNode on;
      on.name = "Outcome";
      on.set_attr("item", p.item);
      on.set_attr("event", p.outcome->attr_or("event", ""));
      if (p.outcome->children.size() != 1) {
        fail("MalformedArchive", "outcome must carry one document");
      }
      on.children.push_back(p.outcome->children.front());
      outcome_rec = std::move(on);
    }
    fold_event_record(rec, outcome_rec ? &*outcome_rec : nullptr);
    append_record_line(to_canonical_xml(rec));
    if (outcome_rec) append_record_line(to_canonical_xml(*outcome_rec));
  }
}

}  // namespace cristal
