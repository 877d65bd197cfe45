// Scripted planner speaking the wire protocol on stdin/stdout or a unix socket.

#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "drivebench/protocol.hpp"

using namespace drivebench;

int main(int argc, char ** argv) {
  CLI::App app{"Scripted mock planner"};
  std::string script_path;
  std::string socket_path;
  int max_connections = 0;
  std::size_t exit_after = 0;
  app.add_option("--script", script_path, "mock script (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--socket", socket_path, "listen on this unix socket instead of stdio");
  app.add_option("--max-connections", max_connections, "exit after serving this many connections (0 = forever)");
  app.add_option("--exit-after", exit_after, "on stdio, hang up after this many replies (0 = never)");
  CLI11_PARSE(app, argc, argv);

  protocol::MockScript script;
  try {
    script = protocol::MockScript::load(script_path);
  } catch (const std::exception & e) {
    std::cerr << "mock_planner: " << e.what() << "\n";
    return 2;
  }

  if (socket_path.empty()) {
    protocol::FdConnection conn(0, 1, false);
    protocol::serve_mock_planner(conn, script, exit_after);
    return 0;
  }

  try {
    protocol::UnixListener listener(socket_path);
    std::vector<std::thread> workers;
    for (int served = 0; max_connections == 0 || served < max_connections; ++served) {
      std::shared_ptr<protocol::FdConnection> conn = listener.accept();
      workers.emplace_back([conn, &script] { protocol::serve_mock_planner(*conn, script); });
    }
    for (auto & w : workers) w.join();
  } catch (const std::exception & e) {
    std::cerr << "mock_planner: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
