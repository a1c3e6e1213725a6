#pragma once

#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace noshow::service {

struct ServerOptions {
  std::string data_dir = "noshow-data";
  int max_concurrent_training = 1;
};

/// JSON API over a model registry rooted at data_dir. Datasets, models and
/// the committed policy are persisted there and reloaded on start.
class ApiServer {
 public:
  explicit ApiServer(ServerOptions options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  httplib::Server& http();
  /// Binds an ephemeral port and returns it (-1 on failure).
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool listen(const std::string& host, int port);
  /// Serves on a port bound by bind_any_port(); blocks.
  bool listen_after_bind();
  void stop();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

}  // namespace noshow::service
