#pragma once

#include <map>
#include <string>

#include "cristal/store.hpp"

namespace cristal {

// The bundled detector-construction example model: Products are registered,
// characterized, then assigned to a position; Orders request product types
// and are acknowledged automatically; Shipments pack products into slots and
// get dispatched.
struct EcalFixture {
  std::map<std::string, Uuid> meta;  // bootstrap items by name
  std::map<std::string, Uuid> schemas;    // SchemaDesc items by schema name
  std::map<std::string, Uuid> scripts;    // ScriptDesc items by script name
  std::map<std::string, Uuid> workflows;  // WorkflowDesc items by name
  std::map<std::string, Uuid> types;      // ItemDesc items by type name
};

// Bootstraps the store when empty, then loads the model: 6 schemas
// (RegisterData, CharacterizeData, AssignData, OrderData, OrderAck,
// ShipmentData), 2 scripts (ack, heavy), 3 workflows and 3 ItemDescs
// (Product, Order, Shipment).
EcalFixture load_ecal_fixture(Store& store);

}  // namespace cristal
