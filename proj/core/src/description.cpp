#include "cristal/description.hpp"

#include <charconv>

#include "cristal/errors.hpp"
#include "cristal/lifecycle.hpp"

namespace cristal {

namespace {

int to_int(const std::string& text) {
  int value = 0;
  std::from_chars(text.data(), text.data() + text.size(), value);
  return value;
}

const Agent kSystemAgent{"system", {"admin"}};

}  // namespace

std::string_view desc_kind_name(DescKind kind) {
  switch (kind) {
    case DescKind::SchemaDesc: return "SchemaDesc";
    case DescKind::WorkflowDesc: return "WorkflowDesc";
    case DescKind::ActivityDesc: return "ActivityDesc";
    case DescKind::ScriptDesc: return "ScriptDesc";
    case DescKind::ItemDesc: return "ItemDesc";
  }
  return "ItemDesc";
}

std::optional<DescKind> desc_kind_from(std::string_view name) {
  if (name == "SchemaDesc") return DescKind::SchemaDesc;
  if (name == "WorkflowDesc") return DescKind::WorkflowDesc;
  if (name == "ActivityDesc") return DescKind::ActivityDesc;
  if (name == "ScriptDesc") return DescKind::ScriptDesc;
  if (name == "ItemDesc") return DescKind::ItemDesc;
  return std::nullopt;
}

bool is_description(const Item& item) {
  return desc_kind_from(item.type_name()).has_value();
}

ItemDescription item_description_from_xml(const XmlNode& doc) {
  if (doc.name != "ItemDescription") {
    fail("OutcomeInvalid", "expected <ItemDescription>, got <" + doc.name + ">");
  }
  ItemDescription desc;
  desc.type_name = doc.attr_or("type", "");
  desc.workflow_ref = {doc.attr_or("workflow", ""),
                       to_int(doc.attr_or("workflowVersion", "0"))};
  if (!is_identifier(desc.type_name)) {
    fail("OutcomeInvalid", "bad type name '" + desc.type_name + "'");
  }
  for (const XmlNode& child : doc.children) {
    if (child.name == "PropertyDef") {
      desc.property_defs.push_back(
          PropertyDef{child.attr_or("name", ""), child.attr_or("default", ""),
                      child.attr_or("mutable", "false") == "true"});
    } else if (child.name == "CollectionDef") {
      CollectionDef c;
      c.name = child.attr_or("name", "");
      c.slot_count = to_int(child.attr_or("slots", "0"));
      c.allowed_target_type = child.attr_or("targetType", "");
      if (c.slot_count < 0) {
        fail("OutcomeInvalid", "collection '" + c.name + "' has negative slots");
      }
      desc.collection_defs.push_back(std::move(c));
    }
  }
  return desc;
}

XmlNode item_description_to_xml(const ItemDescription& desc) {
  XmlNode doc;
  doc.name = "ItemDescription";
  doc.set_attr("type", desc.type_name);
  doc.set_attr("workflow", desc.workflow_ref.first);
  doc.set_attr("workflowVersion", std::to_string(desc.workflow_ref.second));
  for (const PropertyDef& p : desc.property_defs) {
    XmlNode n;
    n.name = "PropertyDef";
    n.set_attr("name", p.name);
    n.set_attr("default", p.default_value);
    n.set_attr("mutable", p.is_mutable ? "true" : "false");
    doc.children.push_back(std::move(n));
  }
  for (const CollectionDef& c : desc.collection_defs) {
    XmlNode n;
    n.name = "CollectionDef";
    n.set_attr("name", c.name);
    n.set_attr("slots", std::to_string(c.slot_count));
    n.set_attr("targetType", c.allowed_target_type);
    doc.children.push_back(std::move(n));
  }
  return doc;
}

WorkflowDef description_workflow(std::string_view kind_schema) {
  WfNode amend;
  amend.kind = WfNode::Kind::Activity;
  amend.activity.name = "Amend";
  amend.activity.role = "admin";
  amend.activity.automatic = true;
  amend.activity.outcome_schema = {{std::string(kind_schema), 0}};
  amend.activity.script = ScriptRef{"amend", 0};

  WfNode loop;
  loop.kind = WfNode::Kind::Loop;
  loop.predicate = ScriptRef{"true", 0};
  loop.children.push_back(std::move(amend));

  return WorkflowDef{0, std::move(loop)};
}

namespace {

struct KindInfo {
  DescKind kind;
  std::string_view item_desc_uuid;
  std::string_view workflow_uuid;
};

KindInfo kind_info(DescKind kind) {
  switch (kind) {
    case DescKind::ItemDesc:
      return {kind, meta::kItemDescOfItemDesc, meta::kWorkflowOfItemDesc};
    case DescKind::SchemaDesc:
      return {kind, meta::kItemDescOfSchemaDesc, meta::kWorkflowOfSchemaDesc};
    case DescKind::WorkflowDesc:
      return {kind, meta::kItemDescOfWorkflowDesc, meta::kWorkflowOfWorkflowDesc};
    case DescKind::ActivityDesc:
      return {kind, meta::kItemDescOfActivityDesc, meta::kWorkflowOfActivityDesc};
    case DescKind::ScriptDesc:
      return {kind, meta::kItemDescOfScriptDesc, meta::kWorkflowOfScriptDesc};
  }
  return {kind, meta::kItemDescOfItemDesc, meta::kWorkflowOfItemDesc};
}

// Extracted Name property for a new description item.
std::string content_display_name(DescKind kind, const XmlNode& content) {
  switch (kind) {
    case DescKind::SchemaDesc:
    case DescKind::ScriptDesc:
    case DescKind::ActivityDesc: return content.attr_or("name", "");
    case DescKind::ItemDesc: return content.attr_or("type", "");
    case DescKind::WorkflowDesc: return "";
  }
  return "";
}

// Validates kind-specific structure and returns the canonical content with
// engine-assigned version attributes. `next_desc_version` is the version the
// outcome will occupy on the description item.
XmlNode canonicalize_content(Store& store, DescKind kind, XmlNode content,
                             int next_desc_version) {
  switch (kind) {
    case DescKind::SchemaDesc: {
      int version = store.schemas().version_count(content.attr_or("name", ""));
      content.set_attr("version", std::to_string(version));
      try {
        schema_from_xml(content);
      } catch (const Error& e) {
        fail("OutcomeInvalid", std::string(e.what()));
      }
      break;
    }
    case DescKind::ScriptDesc: {
      const std::string name = content.attr_or("name", "");
      int version = store.scripts().version_count(name);
      content.set_attr("version", std::to_string(version));
      if (content.name != "Script" || !is_identifier(name)) {
        fail("OutcomeInvalid", "bad script document");
      }
      try {
        Script::parse(content.text);
      } catch (const Error& e) {
        fail("OutcomeInvalid", std::string(e.what()));
      }
      break;
    }
    case DescKind::WorkflowDesc: {
      content.set_attr("version", std::to_string(next_desc_version));
      try {
        workflow_from_xml(content);
      } catch (const Error& e) {
        fail("OutcomeInvalid", std::string(e.what()));
      }
      break;
    }
    case DescKind::ActivityDesc: {
      if (content.name != "Activity" ||
          !is_identifier(content.attr_or("name", ""))) {
        fail("OutcomeInvalid", "bad activity document");
      }
      break;
    }
    case DescKind::ItemDesc: {
      ItemDescription desc = item_description_from_xml(content);
      if (!store.has_item(desc.workflow_ref.first)) {
        fail("OutcomeInvalid", "workflow reference " + desc.workflow_ref.first +
                                   " does not resolve");
      }
      const Item& wf_item = store.item(desc.workflow_ref.first);
      auto vp = wf_item.viewpoints.find(
          {"WorkflowDesc", std::to_string(desc.workflow_ref.second)});
      if (vp == wf_item.viewpoints.end()) {
        fail("OutcomeInvalid",
             "workflow reference version " +
                 std::to_string(desc.workflow_ref.second) + " does not resolve");
      }
      break;
    }
  }
  // The generic gate the paper-level contract requires: content must
  // validate against the kind's built-in content schema.
  ValidationReport report =
      store.schemas().validate(content, desc_kind_name(kind), "0");
  if (!report.valid) {
    std::string detail;
    for (const Violation& v : report.violations) {
      if (!detail.empty()) detail += "; ";
      detail += std::string(violation_code_name(v.code)) + " at " + v.path;
    }
    fail("OutcomeInvalid", detail);
  }
  return content;
}

void register_content_side_effects(Store& store, DescKind kind,
                                   const XmlNode& content) {
  if (kind == DescKind::SchemaDesc) {
    SchemaDef def = schema_from_xml(content);
    store.register_schema(def.name, def.root);
  }
  // ScriptDesc registration happens inside the store when the outcome is
  // committed, so journal replay rebuilds the script registry identically.
}

int amend_with_content(Store& store, const Agent& agent, const Uuid& desc,
                       DescKind kind, XmlNode content) {
  int next_version = 0;
  {
    const Item& item = store.item(desc);
    auto it = item.outcome_counts.find(std::string(desc_kind_name(kind)));
    next_version = it == item.outcome_counts.end() ? 0 : it->second;
  }
  XmlNode canonical = canonicalize_content(store, kind, std::move(content),
                                           next_version);
  register_content_side_effects(store, kind, canonical);
  request_transition(store, agent, desc, "Amend", Transition::Done, canonical);
  return next_version;
}

}  // namespace

std::map<std::string, Uuid> bootstrap(Store& store) {
  if (store.item_count() != 0) {
    fail("StoreNotEmpty", "bootstrap requires an empty store");
  }

  struct MetaSpec {
    DescKind kind;
    std::string name;
    Uuid uuid;
    Uuid item_desc;   // description pin for the creation record
    Uuid workflow;    // workflow description item backing its lifecycle
  };
  std::vector<MetaSpec> metas;
  for (DescKind kind : {DescKind::ItemDesc, DescKind::SchemaDesc,
                        DescKind::WorkflowDesc, DescKind::ActivityDesc,
                        DescKind::ScriptDesc}) {
    KindInfo info = kind_info(kind);
    metas.push_back(MetaSpec{DescKind::ItemDesc,
                             std::string(desc_kind_name(kind)),
                             Uuid(info.item_desc_uuid),
                             Uuid(meta::kItemDescOfItemDesc),
                             Uuid(meta::kWorkflowOfItemDesc)});
  }
  for (DescKind kind : {DescKind::ItemDesc, DescKind::SchemaDesc,
                        DescKind::WorkflowDesc, DescKind::ActivityDesc,
                        DescKind::ScriptDesc}) {
    KindInfo info = kind_info(kind);
    metas.push_back(MetaSpec{DescKind::WorkflowDesc,
                             std::string(desc_kind_name(kind)) + "Workflow",
                             Uuid(info.workflow_uuid),
                             Uuid(meta::kItemDescOfWorkflowDesc),
                             Uuid(meta::kWorkflowOfWorkflowDesc)});
  }
  metas.push_back(MetaSpec{DescKind::ScriptDesc, "true", Uuid(meta::kScriptTrue),
                           Uuid(meta::kItemDescOfScriptDesc),
                           Uuid(meta::kWorkflowOfScriptDesc)});
  metas.push_back(MetaSpec{DescKind::ScriptDesc, "amend",
                           Uuid(meta::kScriptAmend),
                           Uuid(meta::kItemDescOfScriptDesc),
                           Uuid(meta::kWorkflowOfScriptDesc)});

  std::map<std::string, Uuid> by_name;
  for (const MetaSpec& meta_spec : metas) {
    std::vector<Property> props{
        Property{"Name", meta_spec.name, false},
        Property{"Type", std::string(desc_kind_name(meta_spec.kind)), false}};
    store.create_item_full(meta_spec.uuid, std::move(props), {},
                           {{meta_spec.item_desc, 0}});
    by_name[meta_spec.name] = meta_spec.uuid;
  }
  for (const MetaSpec& meta_spec : metas) {
    std::string kind_schema = meta_spec.kind == DescKind::ItemDesc
                                  ? "ItemDesc"
                                  : std::string(desc_kind_name(meta_spec.kind));
    store.assign_workflow(meta_spec.uuid, description_workflow(kind_schema));
  }

  // Content version 0 for every bootstrap item, written through the same
  // Amend machinery user descriptions use.
  for (DescKind kind : {DescKind::ItemDesc, DescKind::SchemaDesc,
                        DescKind::WorkflowDesc, DescKind::ActivityDesc,
                        DescKind::ScriptDesc}) {
    KindInfo info = kind_info(kind);
    ItemDescription desc;
    desc.type_name = std::string(desc_kind_name(kind));
    desc.workflow_ref = {Uuid(info.workflow_uuid), 0};
    desc.property_defs = {PropertyDef{"Name", "", false}};
    amend_with_content(store, kSystemAgent, Uuid(info.item_desc_uuid),
                       DescKind::ItemDesc, item_description_to_xml(desc));
  }
  for (DescKind kind : {DescKind::ItemDesc, DescKind::SchemaDesc,
                        DescKind::WorkflowDesc, DescKind::ActivityDesc,
                        DescKind::ScriptDesc}) {
    KindInfo info = kind_info(kind);
    std::string kind_schema(desc_kind_name(kind));
    amend_with_content(store, kSystemAgent, Uuid(info.workflow_uuid),
                       DescKind::WorkflowDesc,
                       workflow_to_xml(description_workflow(kind_schema)));
  }
  for (const char* name : {"true", "amend"}) {
    XmlNode script;
    script.name = "Script";
    script.set_attr("name", name);
    script.set_attr("version", "0");
    script.text = "true";
    amend_with_content(store, kSystemAgent, by_name.at(name),
                       DescKind::ScriptDesc, std::move(script));
  }
  return by_name;
}

Uuid create_description(Store& store, const Agent& agent, DescKind kind,
                        const XmlNode& content) {
  KindInfo info = kind_info(kind);
  if (!store.has_item(Uuid(info.item_desc_uuid))) {
    fail("StoreNotBootstrapped", "run bootstrap before creating descriptions");
  }
  // Validate before creating anything, so a rejected document leaves no item.
  XmlNode canonical = canonicalize_content(store, kind, content, 0);

  std::vector<Property> props{
      Property{"Name", content_display_name(kind, canonical), false},
      Property{"Type", std::string(desc_kind_name(kind)), false}};
  Uuid uuid = store.create_item_full(std::nullopt, std::move(props), {},
                                     {{Uuid(info.item_desc_uuid), 0}});
  store.assign_workflow(uuid,
                        description_workflow(desc_kind_name(kind)));
  register_content_side_effects(store, kind, canonical);
  request_transition(store, agent, uuid, "Amend", Transition::Done, canonical);
  return uuid;
}

int amend_description(Store& store, const Agent& agent, const Uuid& desc,
                      const XmlNode& content) {
  const Item& item = store.item(desc);
  auto kind = desc_kind_from(item.type_name());
  if (!kind) fail("NotADescription", "item " + desc + " is not a description");
  return amend_with_content(store, agent, desc, *kind, content);
}

Uuid instantiate(Store& store, const Agent& agent, const Uuid& item_desc,
                 std::string_view version_selector, std::optional<Uuid> uuid,
                 const std::vector<std::pair<std::string, std::string>>&
                     property_overrides) {
  const Item& desc_item = store.item(item_desc);
  if (desc_item.type_name() != "ItemDesc") {
    fail("NotADescription", "item " + item_desc + " is not an ItemDesc");
  }
  auto vp = desc_item.viewpoints.find(
      {"ItemDesc", std::string(version_selector)});
  if (vp == desc_item.viewpoints.end()) {
    fail("UnknownVersion", "no ItemDesc version '" +
                               std::string(version_selector) + "' on " +
                               item_desc);
  }
  int desc_version = 0;
  if (version_selector == "last") {
    desc_version = desc_item.outcome_counts.at("ItemDesc") - 1;
  } else {
    desc_version = to_int(std::string(version_selector));
  }
  ItemDescription desc = item_description_from_xml(
      parse_xml(desc_item.outcomes.at(vp->second).document));

  // Workflow version pinned as of the chosen ItemDescription version.
  const Item& wf_item = store.item(desc.workflow_ref.first);
  auto wf_vp = wf_item.viewpoints.find(
      {"WorkflowDesc", std::to_string(desc.workflow_ref.second)});
  if (wf_vp == wf_item.viewpoints.end()) {
    fail("UnknownVersion", "pinned workflow version does not resolve");
  }
  WorkflowDef wf_def =
      workflow_from_xml(parse_xml(wf_item.outcomes.at(wf_vp->second).document));

  std::vector<Property> props;
  props.push_back(Property{"Type", desc.type_name, false});
  for (const auto& [name, value] : property_overrides) {
    bool declared = false;
    for (const PropertyDef& def : desc.property_defs) {
      if (def.name == name) {
        declared = true;
        break;
      }
    }
    if (!declared) {
      fail("UnknownProperty", "override names undeclared property '" + name + "'");
    }
  }
  for (const PropertyDef& def : desc.property_defs) {
    std::string value = def.default_value;
    for (const auto& [name, override_value] : property_overrides) {
      if (name == def.name) {
        value = override_value;
        break;
      }
    }
    props.push_back(Property{def.name, value, def.is_mutable});
  }

  std::vector<CollectionState> collections;
  for (const CollectionDef& def : desc.collection_defs) {
    CollectionState c;
    c.name = def.name;
    c.allowed_target_type = def.allowed_target_type;
    c.slots.resize(static_cast<size_t>(def.slot_count));
    for (size_t i = 0; i < c.slots.size(); ++i) {
      c.slots[i].slot_id = static_cast<int>(i);
    }
    collections.push_back(std::move(c));
  }

  Uuid created = store.create_item_full(std::move(uuid), std::move(props),
                                        std::move(collections),
                                        {{item_desc, desc_version}});
  store.assign_workflow(created, wf_def);
  (void)agent;
  return created;
}

}  // namespace cristal
