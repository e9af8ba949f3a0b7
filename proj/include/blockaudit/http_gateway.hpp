#pragma once

// HTTP binding for Gateway:
//
//   POST /createAudit                      body: wire transaction JSON
//   GET  /audit/{className}/{entityId}     committed history, chain order
//   GET  /chain/verify                     verification report

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "blockaudit/gateway.hpp"

namespace blockaudit {

inline void mount_gateway_routes(httplib::Server& server, Gateway& gateway) {
  constexpr const char* kJson = "application/json";

  server.Post("/createAudit", [&gateway](const httplib::Request& req, httplib::Response& res) {
    auto receipt = gateway.create_audit(req.body);
    res.status = receipt.http_status();
    res.set_content(receipt.to_json().dump(), kJson);
  });

  server.Get(R"(/audit/([^/]+)/(-?\d+))", [&gateway](const httplib::Request& req, httplib::Response& res) {
    std::int64_t entity_id = 0;
    try {
      entity_id = std::stoll(req.matches[2].str());
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content(R"({"reason":"invalid_argument","message":"entity id out of range"})", kJson);
      return;
    }
    auto history = gateway.get_history(req.matches[1].str(), entity_id);
    res.set_content(history_to_json(history), kJson);
  });

  server.Get("/chain/verify", [&gateway](const httplib::Request&, httplib::Response& res) {
    res.set_content(gateway.get_verification().to_json().dump(), kJson);
  });
}

}  // namespace blockaudit
