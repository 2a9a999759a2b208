#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cristal/store.hpp"

namespace cristal {

enum class DescKind { SchemaDesc, WorkflowDesc, ActivityDesc, ScriptDesc, ItemDesc };

std::string_view desc_kind_name(DescKind kind);
std::optional<DescKind> desc_kind_from(std::string_view name);

// Reserved uuids of the bootstrap set. Fixed constants so archives from
// different processes stay comparable.
namespace meta {
inline constexpr std::string_view kItemDescOfItemDesc =
    "00000000-0000-4000-8000-000000000001";
inline constexpr std::string_view kItemDescOfSchemaDesc =
    "00000000-0000-4000-8000-000000000002";
inline constexpr std::string_view kItemDescOfWorkflowDesc =
    "00000000-0000-4000-8000-000000000003";
inline constexpr std::string_view kItemDescOfActivityDesc =
    "00000000-0000-4000-8000-000000000004";
inline constexpr std::string_view kItemDescOfScriptDesc =
    "00000000-0000-4000-8000-000000000005";
inline constexpr std::string_view kWorkflowOfItemDesc =
    "00000000-0000-4000-8000-000000000006";
inline constexpr std::string_view kWorkflowOfSchemaDesc =
    "00000000-0000-4000-8000-000000000007";
inline constexpr std::string_view kWorkflowOfWorkflowDesc =
    "00000000-0000-4000-8000-000000000008";
inline constexpr std::string_view kWorkflowOfActivityDesc =
    "00000000-0000-4000-8000-000000000009";
inline constexpr std::string_view kWorkflowOfScriptDesc =
    "00000000-0000-4000-8000-00000000000a";
inline constexpr std::string_view kScriptTrue =
    "00000000-0000-4000-8000-00000000000b";
inline constexpr std::string_view kScriptAmend =
    "00000000-0000-4000-8000-00000000000c";
}  // namespace meta

// Parsed content of an ItemDesc version.
struct PropertyDef {
  std::string name;
  std::string default_value;
  bool is_mutable = false;
};
struct CollectionDef {
  std::string name;
  int slot_count = 0;
  std::string allowed_target_type;  // empty = unrestricted
};
struct ItemDescription {
  std::string type_name;
  std::pair<Uuid, int> workflow_ref;
  std::vector<PropertyDef> property_defs;
  std::vector<CollectionDef> collection_defs;
};

ItemDescription item_description_from_xml(const XmlNode& doc);
XmlNode item_description_to_xml(const ItemDescription& desc);

// The built-in lifecycle every description item runs: an Amend activity with
// the kind's content schema, looping forever.
WorkflowDef description_workflow(std::string_view kind_schema);

// Creates the self-describing meta items in an empty store. Returns the
// bootstrap items keyed by their Name property.
std::map<std::string, Uuid> bootstrap(Store& store);

// Creates a new description item of the given kind; the content document is
// validated, canonicalized (version attributes are assigned by the engine),
// and written as version 0 through an Amend pair. SchemaDesc and ScriptDesc
// contents are also registered with the matching registry.
Uuid create_description(Store& store, const Agent& agent, DescKind kind,
                        const XmlNode& content);

// Writes the next content version; prior versions stay retrievable through
// their numbered viewpoints. Returns the new version number.
int amend_description(Store& store, const Agent& agent, const Uuid& desc,
                      const XmlNode& content);

// Builds a new item from an ItemDesc version: type and properties from the
// declaration (plus overrides), declared collections, and the workflow
// version pinned by that ItemDesc version.
Uuid instantiate(Store& store, const Agent& agent, const Uuid& item_desc,
                 std::string_view version_selector,
                 std::optional<Uuid> uuid = std::nullopt,
                 const std::vector<std::pair<std::string, std::string>>&
                     property_overrides = {});

// True when the item's Type property names a description kind.
bool is_description(const Item& item);

}  // namespace cristal
