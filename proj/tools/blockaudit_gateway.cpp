// blockaudit-gateway: HTTP front end over an in-process simulated network.
//
//   blockaudit-gateway --nodes 4 --port 8080
//   curl -X POST --data @txn.json localhost:8080/createAudit
//   curl localhost:8080/audit/SAGE.BL.InspSystem.PermitInspection/161031
//   curl localhost:8080/chain/verify

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "blockaudit/http_gateway.hpp"

namespace ba = blockaudit;

int main(int argc, char** argv) {
  CLI::App app{"Audit log gateway"};
  ba::SimConfig sim;
  sim.n_nodes = 4;
  std::uint32_t node = 0;
  std::string host = "127.0.0.1";
  int port = 8080;
  app.add_option("--nodes", sim.n_nodes, "replicas in the simulated network")->check(CLI::PositiveNumber);
  app.add_option("--node", node, "replica this gateway is attached to");
  app.add_option("--seed", sim.rng_seed, "simulation seed");
  app.add_option("--host", host, "listen address");
  app.add_option("--port", port, "listen port")->check(CLI::Range(1, 65535));
  CLI11_PARSE(app, argc, argv);

  try {
    sim.validate();
    ba::SimNetwork network(sim);
    ba::Gateway gateway(network, node, /*drive_network=*/true);
    httplib::Server server;
    ba::mount_gateway_routes(server, gateway);
    std::cerr << "listening on " << host << ":" << port << " (" << sim.n_nodes << " replicas, node "
              << node << ")\n";
    if (!server.listen(host, port)) {
      std::cerr << "cannot listen on " << host << ":" << port << "\n";
      return 1;
    }
  } catch (const ba::Error& e) {
    std::cerr << "error (" << ba::to_string(e.code()) << "): " << e.what() << "\n";
    return 3;
  }
  return 0;
}
