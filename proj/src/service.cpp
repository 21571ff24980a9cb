#include "affmem/service.hpp"

#include <chrono>
#include <regex>

#include <httplib.h>

#include "affmem/error.hpp"

namespace affmem {

Timestamp system_clock_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

namespace {

ApiResponse reply(int status, const json& body) { return {status, body.dump()}; }

ApiResponse error_reply(int status, std::string_view code, const std::string& detail) {
    return reply(status, json{{"error", code}, {"detail", detail}});
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::not_found:
        case ErrorCode::deleted: return 404;
        case ErrorCode::invalid_argument:
        case ErrorCode::budget_infeasible:
        case ErrorCode::dimension_mismatch: return 422;
        case ErrorCode::backend_unavailable:
        case ErrorCode::malformed_judgment: return 502;
        case ErrorCode::storage_unavailable: return 503;
        case ErrorCode::zero_baseline: return 422;
    }
    return 500;
}

bool valid_identifier(const std::string& s) {
    static const std::regex re("[A-Za-z0-9_.@-]{1,128}");
    return std::regex_match(s, re);
}

// "anxiety:0.8,sadness:0.2"
EmotionVector parse_emotion_param(const std::string& s) {
    EmotionVector v;
    std::size_t start = 0;
    while (start < s.size()) {
        auto end = s.find(',', start);
        if (end == std::string::npos) end = s.size();
        const std::string item = s.substr(start, end - start);
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::invalid_argument, "emotion item '" + item + "' needs name:value");
        try {
            v[parse_emotion_category(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::invalid_argument, "bad emotion value in '" + item + "'");
        }
        start = end + 1;
    }
    if (auto vs = validate(v); !vs.empty()) throw Error(ErrorCode::invalid_argument, "emotion: " + vs.front());
    return v;
}

const std::string& param(const std::map<std::string, std::string>& q, const std::string& key) {
    static const std::string empty;
    auto it = q.find(key);
    return it == q.end() ? empty : it->second;
}

}  // namespace

ServiceApi::ServiceApi(Engine& engine, MemoryStore& store, ModelGateway& gateway, Clock clock)
    : engine_(engine), store_(store), gateway_(gateway), clock_(std::move(clock)) {}

Timestamp ServiceApi::timestamp_from(const json& body) const {
    if (body.is_object()) {
        if (auto it = body.find("timestamp"); it != body.end() && it->is_number_integer()) return it->get<Timestamp>();
    }
    return clock_();
}

ApiResponse ServiceApi::handle(const ApiRequest& req) {
    static const std::regex user_sessions("^/v1/users/([^/]+)/sessions$");
    static const std::regex session("^/v1/sessions/([^/]+)$");
    static const std::regex session_turns("^/v1/sessions/([^/]+)/turns$");
    static const std::regex user_memories("^/v1/users/([^/]+)/memories$");
    static const std::regex memory("^/v1/memories/([^/]+)$");
    static const std::regex search_re("^/v1/users/([^/]+)/memories/search$");
    static const std::regex user_nodes("^/v1/users/([^/]+)/graph/nodes$");
    static const std::regex edges("^/v1/graph/edges$");
    static const std::regex node_hood("^/v1/graph/nodes/([^/]+)/neighborhood$");
    static const std::regex theme("^/v1/users/([^/]+)/themes/([^/]+)/trajectory$");

    json body;
    if (!req.body.empty()) {
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            return error_reply(400, "bad-json", e.what());
        }
    }

    std::smatch m;
    const std::string& p = req.path;
    try {
        if (p == "/healthz" && req.method == "GET") return reply(200, json{{"status", "ok"}});
        if (std::regex_match(p, m, user_sessions) && req.method == "POST") return create_session(m[1], body);
        if (std::regex_match(p, m, session) && req.method == "GET") return get_session(m[1]);
        if (std::regex_match(p, m, session_turns) && req.method == "POST") return post_turn(m[1], body);
        if (std::regex_match(p, m, search_re) && req.method == "GET") return search(m[1], req.query);
        if (std::regex_match(p, m, user_memories) && req.method == "POST") return add_memory(m[1], body);
        if (std::regex_match(p, m, memory) && req.method == "PATCH") return patch_memory(m[1], body);
        if (std::regex_match(p, m, memory) && req.method == "DELETE") return delete_memory(m[1], body);
        if (std::regex_match(p, m, user_nodes) && req.method == "POST") return upsert_node(m[1], body);
        if (std::regex_match(p, edges) && req.method == "POST") return add_edge(body);
        if (std::regex_match(p, m, node_hood) && req.method == "GET") return neighborhood(m[1], req.query);
        if (std::regex_match(p, m, theme) && req.method == "GET") return theme_trajectory(m[1], m[2]);
        return error_reply(404, "no-route", req.method + " " + p);
    } catch (const Error& e) {
        return error_reply(status_for(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
        return error_reply(422, "invalid-argument", e.what());
    }
}

ApiResponse ServiceApi::create_session(const std::string& uid, const json& body) {
    if (!valid_identifier(uid)) return error_reply(422, "invalid-argument", "malformed user id");
    return reply(201, engine_.create_session(uid, timestamp_from(body)));
}

ApiResponse ServiceApi::get_session(const std::string& sid) {
    auto s = engine_.get_session(sid);
    if (!s) return error_reply(404, "not-found", "session " + sid);
    return reply(200, *s);
}

ApiResponse ServiceApi::post_turn(const std::string& sid, const json& body) {
    if (!engine_.get_session(sid)) return error_reply(404, "not-found", "session " + sid);
    if (!body.is_object() || !body.contains("text") || !body.at("text").is_string()) {
        return error_reply(422, "invalid-argument", "body needs a text string");
    }
    const auto text = body.at("text").get<std::string>();
    if (text.empty()) return error_reply(422, "invalid-argument", "empty text");
    std::optional<EmotionSignal> voice;
    if (auto it = body.find("voice_emotion"); it != body.end() && !it->is_null()) {
        json v = *it;
        if (!v.contains("modality")) v["modality"] = "voice";
        voice = v.get<EmotionSignal>();
        voice->modality = Modality::voice;
        if (auto vs = validate(*voice); !vs.empty()) return error_reply(422, "invalid-argument", "voice_emotion: " + vs.front());
    }
    return reply(200, engine_.process_turn(sid, text, voice, timestamp_from(body)));
}

ApiResponse ServiceApi::add_memory(const std::string& uid, const json& body) {
    if (!valid_identifier(uid)) return error_reply(422, "invalid-argument", "malformed user id");
    if (!body.is_object() || !body.contains("content") || !body.at("content").is_string()) {
        return error_reply(422, "invalid-argument", "body needs a content string");
    }
    EmotionVector emotion;
    if (auto it = body.find("emotion_context"); it != body.end() && !it->is_null()) emotion = it->get<EmotionVector>();
    return reply(201, store_.add_memory(uid, body.at("content").get<std::string>(), emotion, timestamp_from(body)));
}

ApiResponse ServiceApi::patch_memory(const std::string& mid, const json& body) {
    if (!body.is_object()) return error_reply(422, "invalid-argument", "body must be an object");
    std::optional<std::string> content;
    std::optional<EmotionVector> emotion;
    if (auto it = body.find("content"); it != body.end() && !it->is_null()) content = it->get<std::string>();
    if (auto it = body.find("emotion_context"); it != body.end() && !it->is_null()) emotion = it->get<EmotionVector>();
    return reply(200, store_.update_memory(mid, content, emotion, timestamp_from(body)));
}

ApiResponse ServiceApi::delete_memory(const std::string& mid, const json& body) {
    store_.delete_memory(mid, timestamp_from(body));
    return reply(200, json{{"deleted", mid}});
}

ApiResponse ServiceApi::search(const std::string& uid, const std::map<std::string, std::string>& query) {
    const std::string& q = param(query, "q");
    if (q.empty()) return error_reply(422, "invalid-argument", "q is required");
    RetrievalConfig cfg = engine_.config().retrieval;
    try {
        if (const auto& a = param(query, "alpha"); !a.empty()) cfg.alpha = std::stod(a);
        if (const auto& k = param(query, "k"); !k.empty()) cfg.k = std::stoi(k);
    } catch (const std::logic_error&) {
        return error_reply(400, "invalid-argument", "alpha and k must be numeric");
    }
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) return error_reply(400, "invalid-argument", "alpha outside [0,1]");
    if (cfg.k < 1) return error_reply(400, "invalid-argument", "k must be >= 1");

    EmotionVector emotion;
    if (const auto& e = param(query, "emotion"); !e.empty()) {
        emotion = parse_emotion_param(e);
    } else {
        emotion = gateway_.detect_text_emotion(q).vector;
    }

    const auto hits = retrieve(store_, gateway_, uid, q, emotion, cfg);
    json out = json::array();
    for (const auto& h : hits) {
        json item = h;
        if (auto unit = store_.get(h.memory_id)) {
            item["content"] = unit->content;
            item["version"] = unit->version;
        }
        out.push_back(std::move(item));
    }
    return reply(200, json{{"query", q}, {"alpha", cfg.alpha}, {"k", cfg.k}, {"query_emotion", emotion}, {"hits", out}});
}

ApiResponse ServiceApi::upsert_node(const std::string& uid, const json& body) {
    if (!valid_identifier(uid)) return error_reply(422, "invalid-argument", "malformed user id");
    const auto kind = parse_node_kind(body.at("kind").get<std::string>());
    const auto attributes = body.value("attributes", std::map<std::string, std::string>{});
    return reply(201, store_.upsert_node(uid, kind, body.at("name").get<std::string>(), attributes, timestamp_from(body)));
}

ApiResponse ServiceApi::add_edge(const json& body) {
    const auto e = store_.add_edge(body.at("from").get<std::string>(), body.at("to").get<std::string>(),
                                   parse_edge_type(body.at("type").get<std::string>()), timestamp_from(body));
    return reply(201, e);
}

ApiResponse ServiceApi::neighborhood(const std::string& nid, const std::map<std::string, std::string>& query) {
    int hops = 1;
    try {
        if (const auto& h = param(query, "hops"); !h.empty()) hops = std::stoi(h);
    } catch (const std::logic_error&) {
        return error_reply(400, "invalid-argument", "hops must be an integer");
    }
    if (hops < 1) return error_reply(400, "invalid-argument", "hops must be >= 1");
    return reply(200, store_.neighborhood(nid, hops));
}

ApiResponse ServiceApi::theme_trajectory(const std::string& uid, const std::string& theme) {
    return reply(200, json{{"theme", theme}, {"events", store_.theme_trajectory(uid, theme)}});
}

// --- httplib binding -----------------------------------------------------------------------------

struct HttpServer::Impl {
    explicit Impl(ServiceApi& a) : api(a) {}
    ServiceApi& api;
    httplib::Server server;
};

HttpServer::HttpServer(ServiceApi& api) : impl_(std::make_unique<Impl>(api)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        ApiRequest r{req.method, req.path, req.body, {}};
        for (const auto& [k, v] : req.params) r.query[k] = v;
        const ApiResponse out = impl_->api.handle(r);
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    impl_->server.Get(".*", handler);
    impl_->server.Post(".*", handler);
    impl_->server.Patch(".*", handler);
    impl_->server.Delete(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace affmem
