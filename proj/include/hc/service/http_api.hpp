#pragma once

#include <chrono>
#include <string>

#include "hc/service/session_service.hpp"

namespace httplib {
class Server;
}

namespace hc::service {

struct HttpOptions {
  /// When non-empty every request must carry a matching X-API-Token header.
  std::string api_token;
  /// How often the idle-session reaper runs while serving.
  std::chrono::milliseconds reap_interval{10'000};
};

/// Registers every endpoint on `server`. `service` must outlive it.
void install_routes(httplib::Server& server, SessionService& service, const HttpOptions& options);

/// Blocks serving on host:port until the process is stopped or listening fails.
/// Returns false if the socket could not be bound.
bool run_server(SessionService& service, const std::string& host, int port,
                const HttpOptions& options);

}  // namespace hc::service
