// affmem-server: JSON HTTP service over the turn pipeline and the memory store.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "affmem/error.hpp"
#include "affmem/service.hpp"

using namespace affmem;

namespace {
HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
    if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Emotion-aware memory service"};
    std::string config_path, host = "127.0.0.1";
    int port = 8080;
    app.add_option("--config", config_path, "engine config JSON");
    app.add_option("--host", host, "bind address");
    app.add_option("--port", port, "port (0 = any free port)");
    CLI11_PARSE(app, argc, argv);

    try {
        EngineConfig cfg;
        if (!config_path.empty()) {
            cfg = load_engine_config(config_path);
        } else {
            apply_env_overrides(cfg);
        }
        auto gateway = make_gateway(cfg.gateway);
        MemoryStore store(cfg.store, *gateway);
        Engine engine(cfg, *gateway, store);
        ServiceApi api(engine, store, *gateway);
        HttpServer server(api);

        const int bound = server.bind(host, port);
        if (bound < 0) {
            std::cerr << "cannot bind " << host << ":" << port << "\n";
            return 1;
        }
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cout << "listening on " << host << ":" << bound << std::endl;
        server.listen();
        g_server = nullptr;
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return 2;
    }
    return 0;
}
