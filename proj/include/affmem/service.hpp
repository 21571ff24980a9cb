#pragma once
// HTTP surface over the engine. Routing and handlers work on plain
// ApiRequest/ApiResponse values so they can be exercised without sockets;
// serve() binds them to a cpp-httplib server.
//
//   GET    /healthz
//   POST   /v1/users/{uid}/sessions
//   GET    /v1/sessions/{sid}
//   POST   /v1/sessions/{sid}/turns                 {text, voice_emotion?, timestamp?}
//   POST   /v1/users/{uid}/memories                 {content, emotion_context?, timestamp?}
//   PATCH  /v1/memories/{mid}                       {content?, emotion_context?, timestamp?}
//   DELETE /v1/memories/{mid}
//   GET    /v1/users/{uid}/memories/search?q=&alpha=&k=&emotion=
//   POST   /v1/users/{uid}/graph/nodes              {kind, name, attributes?, timestamp?}
//   POST   /v1/graph/edges                          {from, to, type, timestamp?}
//   GET    /v1/graph/nodes/{nid}/neighborhood?hops=
//   GET    /v1/users/{uid}/themes/{name}/trajectory

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "affmem/engine.hpp"

namespace affmem {

struct ApiRequest {
    std::string method;
    std::string path;
    std::string body;
    std::map<std::string, std::string> query;
};

struct ApiResponse {
    int status = 200;
    std::string body;  // JSON
};

using Clock = std::function<Timestamp()>;
Timestamp system_clock_ms();

class ServiceApi {
public:
    ServiceApi(Engine& engine, MemoryStore& store, ModelGateway& gateway, Clock clock = system_clock_ms);

    ApiResponse handle(const ApiRequest& req);

private:
    ApiResponse create_session(const std::string& uid, const json& body);
    ApiResponse get_session(const std::string& sid);
    ApiResponse post_turn(const std::string& sid, const json& body);
    ApiResponse add_memory(const std::string& uid, const json& body);
    ApiResponse patch_memory(const std::string& mid, const json& body);
    ApiResponse delete_memory(const std::string& mid, const json& body);
    ApiResponse search(const std::string& uid, const std::map<std::string, std::string>& query);
    ApiResponse upsert_node(const std::string& uid, const json& body);
    ApiResponse add_edge(const json& body);
    ApiResponse neighborhood(const std::string& nid, const std::map<std::string, std::string>& query);
    ApiResponse theme_trajectory(const std::string& uid, const std::string& theme);

    Timestamp timestamp_from(const json& body) const;

    Engine& engine_;
    MemoryStore& store_;
    ModelGateway& gateway_;
    Clock clock_;
};

// cpp-httplib binding for ServiceApi.
class HttpServer {
public:
    explicit HttpServer(ServiceApi& api);
    ~HttpServer();

    // port 0 picks a free port. Returns the bound port, or -1 on failure.
    int bind(const std::string& host, int port);
    // Blocks until stop() is called from another thread.
    bool listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace affmem
