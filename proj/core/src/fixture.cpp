#include "cristal/fixture.hpp"

#include "cristal/description.hpp"
#include "cristal/errors.hpp"

namespace cristal {

namespace {

const Agent kModeller{"modeller", {"admin"}};

XmlNode schema_doc(const std::string& name, const ElementSpec& root) {
  return schema_to_xml(SchemaDef{name, 0, root});
}

ElementSpec leaf(std::string name, ValueKind kind, int min = 1, int max = 1) {
  ElementSpec s;
  s.name = std::move(name);
  s.kind = kind;
  s.min_occurs = min;
  s.max_occurs = max;
  return s;
}

XmlNode script_doc(const std::string& name, const std::string& body) {
  XmlNode doc;
  doc.name = "Script";
  doc.set_attr("name", name);
  doc.set_attr("version", "0");
  doc.text = body;
  return doc;
}

WfNode activity(std::string name, std::string role,
                std::optional<std::pair<std::string, int>> schema,
                std::optional<ScriptRef> script = std::nullopt) {
  WfNode n;
  n.kind = WfNode::Kind::Activity;
  n.activity.name = std::move(name);
  n.activity.role = std::move(role);
  n.activity.outcome_schema = std::move(schema);
  if (script) {
    n.activity.automatic = true;
    n.activity.script = std::move(script);
  }
  return n;
}

WfNode sequence(std::vector<WfNode> children) {
  WfNode n;
  n.kind = WfNode::Kind::Sequence;
  n.children = std::move(children);
  return n;
}

}  // namespace

EcalFixture load_ecal_fixture(Store& store) {
  EcalFixture fx;
  if (store.item_count() == 0) {
    fx.meta = bootstrap(store);
  } else if (!store.has_item(Uuid(meta::kItemDescOfItemDesc))) {
    fail("StoreNotBootstrapped", "journal has items but no bootstrap set");
  }

  // Schemas. CharacterizeData and RegisterData both describe the physical
  // product, so both roots are named Product.
  {
    ElementSpec root = leaf("Product", ValueKind::Composite);
    root.kind = ValueKind::Composite;
    root.children = {leaf("Barcode", ValueKind::String)};
    fx.schemas["RegisterData"] = create_description(
        store, kModeller, DescKind::SchemaDesc, schema_doc("RegisterData", root));
  }
  {
    ElementSpec grade = leaf("Grade", ValueKind::String, 0, 1);
    grade.allowed_values = {"A", "B", "C"};
    ElementSpec root = leaf("Product", ValueKind::Composite);
    root.kind = ValueKind::Composite;
    root.children = {leaf("Barcode", ValueKind::String),
                     leaf("Weight", ValueKind::Decimal), std::move(grade)};
    fx.schemas["CharacterizeData"] =
        create_description(store, kModeller, DescKind::SchemaDesc,
                           schema_doc("CharacterizeData", root));
  }
  {
    ElementSpec root = leaf("Assign", ValueKind::Composite);
    root.kind = ValueKind::Composite;
    root.children = {leaf("Position", ValueKind::String)};
    fx.schemas["AssignData"] = create_description(
        store, kModeller, DescKind::SchemaDesc, schema_doc("AssignData", root));
  }
  {
    ElementSpec root = leaf("Order", ValueKind::Composite);
    root.kind = ValueKind::Composite;
    root.children = {leaf("RequestedType", ValueKind::String),
                     leaf("Quantity", ValueKind::Integer)};
    fx.schemas["OrderData"] = create_description(
        store, kModeller, DescKind::SchemaDesc, schema_doc("OrderData", root));
  }
  {
    ElementSpec root = leaf("Ack", ValueKind::Composite);
    root.kind = ValueKind::Composite;
    root.children = {leaf("Accepted", ValueKind::Boolean),
                     leaf("Note", ValueKind::String)};
    fx.schemas["OrderAck"] = create_description(
        store, kModeller, DescKind::SchemaDesc, schema_doc("OrderAck", root));
  }
  {
    ElementSpec root = leaf("Shipment", ValueKind::Composite);
    root.kind = ValueKind::Composite;
    root.children = {leaf("Carrier", ValueKind::String),
                     leaf("Count", ValueKind::Integer)};
    fx.schemas["ShipmentData"] = create_description(
        store, kModeller, DescKind::SchemaDesc, schema_doc("ShipmentData", root));
  }

  // Scripts.
  fx.scripts["ack"] = create_description(
      store, kModeller, DescKind::ScriptDesc,
      script_doc("ack",
                 "Ack/Accepted := true; "
                 "Ack/Note := prop(\"RequestedType\") + \" accepted\""));
  fx.scripts["heavy"] = create_description(
      store, kModeller, DescKind::ScriptDesc,
      script_doc("heavy",
                 "field(\"CharacterizeData\",\"last\",\"Product/Weight\") > 10.0"));

  // Workflows.
  {
    WorkflowDef def{0, sequence({
                           activity("register", "operator", {{"RegisterData", 0}}),
                           activity("characterize", "operator",
                                    {{"CharacterizeData", 0}}),
                           activity("assign", "coordinator", {{"AssignData", 0}}),
                       })};
    fx.workflows["ProductWorkflow"] = create_description(
        store, kModeller, DescKind::WorkflowDesc, workflow_to_xml(def));
  }
  {
    WorkflowDef def{0, sequence({
                           activity("place", "coordinator", {{"OrderData", 0}}),
                           activity("acknowledge", "system", {{"OrderAck", 0}},
                                    ScriptRef{"ack", 0}),
                       })};
    fx.workflows["OrderWorkflow"] = create_description(
        store, kModeller, DescKind::WorkflowDesc, workflow_to_xml(def));
  }
  {
    WorkflowDef def{0, sequence({
                           activity("pack", "operator", {{"ShipmentData", 0}}),
                           activity("dispatch", "coordinator", std::nullopt),
                       })};
    fx.workflows["ShipmentWorkflow"] = create_description(
        store, kModeller, DescKind::WorkflowDesc, workflow_to_xml(def));
  }

  // Item descriptions.
  {
    ItemDescription desc;
    desc.type_name = "Product";
    desc.workflow_ref = {fx.workflows["ProductWorkflow"], 0};
    desc.property_defs = {PropertyDef{"Name", "", false},
                          PropertyDef{"Status", "new", true}};
    fx.types["Product"] = create_description(store, kModeller, DescKind::ItemDesc,
                                             item_description_to_xml(desc));
  }
  {
    ItemDescription desc;
    desc.type_name = "Order";
    desc.workflow_ref = {fx.workflows["OrderWorkflow"], 0};
    desc.property_defs = {PropertyDef{"Name", "", false},
                          PropertyDef{"RequestedType", "", true}};
    fx.types["Order"] = create_description(store, kModeller, DescKind::ItemDesc,
                                           item_description_to_xml(desc));
  }
  {
    ItemDescription desc;
    desc.type_name = "Shipment";
    desc.workflow_ref = {fx.workflows["ShipmentWorkflow"], 0};
    desc.property_defs = {PropertyDef{"Name", "", false},
                          PropertyDef{"Status", "packing", true}};
    desc.collection_defs = {CollectionDef{"contents", 3, "Product"}};
    fx.types["Shipment"] = create_description(store, kModeller, DescKind::ItemDesc,
                                              item_description_to_xml(desc));
  }
  return fx;
}

}  // namespace cristal
