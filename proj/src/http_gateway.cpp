#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "affmem/error.hpp"
#include "affmem/gateway.hpp"

namespace affmem {

namespace {

// "http://host:port/base" -> {"http://host:port", "/base"}
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = endpoint.find('/', host_start);
    if (path_start == std::string::npos) return {endpoint, ""};
    std::string base = endpoint.substr(path_start);
    while (!base.empty() && base.back() == '/') base.pop_back();
    return {endpoint.substr(0, path_start), base};
}

}  // namespace

HttpGateway::HttpGateway(GatewayConfig cfg) : cfg_(std::move(cfg)) {
    if (auto v = validate(cfg_); !v.empty()) throw Error(ErrorCode::invalid_argument, v.front());
    std::tie(scheme_host_port_, base_path_) = split_endpoint(*cfg_.endpoint);
}

HttpGateway::~HttpGateway() = default;

json HttpGateway::post(const std::string& op, const json& body) {
    httplib::Client client(scheme_host_port_);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (const char* token = std::getenv(cfg_.token_env.c_str()); token && *token) {
        client.set_bearer_token_auth(token);
    }

    const std::string path = base_path_ + "/" + op;
    const std::string payload = body.dump();
    std::string last_error;
    const int attempts_allowed = 1 + std::max(cfg_.max_retries, 0);
    for (int attempt = 0; attempt < attempts_allowed; ++attempt) {
        if (attempt > 0) {
            const long long delay = std::min<long long>(static_cast<long long>(cfg_.backoff_base_ms) << (attempt - 1), cfg_.backoff_cap_ms);
            std::this_thread::sleep_for(std::chrono::milliseconds(std::max(delay, 0LL)));
        }
        ++attempts_;
        auto res = client.Post(path, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw Error(ErrorCode::backend_unavailable, op + ": HTTP " + std::to_string(res->status));
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            // The body arrived, so this is not a transport problem; judge
            // callers map it to malformed-judgment.
            throw Error(ErrorCode::malformed_judgment, op + ": unparseable response: " + e.what());
        }
    }
    throw Error(ErrorCode::backend_unavailable,
                op + ": " + last_error + " after " + std::to_string(attempts_allowed) + " attempts");
}

std::vector<double> HttpGateway::embed(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::invalid_argument, "embed: empty text");
    try {
        auto v = post("embed", {{"text", text}}).at("embedding").get<std::vector<double>>();
        if (v.size() != cfg_.embedding_dim) {
            throw Error(ErrorCode::dimension_mismatch, "embed: expected dimension " + std::to_string(cfg_.embedding_dim) +
                                                           ", got " + std::to_string(v.size()));
        }
        return v;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::backend_unavailable, std::string("embed: bad response: ") + e.what());
    }
}

EmotionSignal HttpGateway::detect_text_emotion(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::invalid_argument, "detect_text_emotion: empty text");
    try {
        auto sig = post("emotion", {{"text", text}}).get<EmotionSignal>();
        sig.modality = Modality::text;
        return sig;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::backend_unavailable, std::string("emotion: bad response: ") + e.what());
    }
}

IntentLabel HttpGateway::classify_intent(std::string_view text, std::span<const UserTurn> history) {
    json hist = json::array();
    for (const auto& t : history) hist.push_back(t);
    try {
        return post("intent", {{"text", text}, {"history", hist}}).get<IntentLabel>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::backend_unavailable, std::string("intent: bad response: ") + e.what());
    }
}

std::string HttpGateway::generate(std::string_view input) {
    if (input.empty()) throw Error(ErrorCode::invalid_argument, "generate: empty input");
    try {
        return post("generate", {{"input", input}}).at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::backend_unavailable, std::string("generate: bad response: ") + e.what());
    }
}

SimulatedTurn HttpGateway::simulate_user(const Persona& persona, const Transcript& so_far, const Scenario& scenario) {
    try {
        const json res = post("simulate", {{"persona", persona}, {"transcript", so_far}, {"scenario", scenario}});
        return {res.at("utterance").get<std::string>(), res.at("done").get<bool>()};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::backend_unavailable, std::string("simulate: bad response: ") + e.what());
    }
}

JudgeRecord HttpGateway::judge(std::string_view scenario_id, std::string_view transcript_one,
                               std::string_view transcript_two, std::string_view rubric) {
    if (transcript_one.empty() || transcript_two.empty()) throw Error(ErrorCode::invalid_argument, "judge: empty transcript");
    const json body = {{"scenario_id", scenario_id},
                       {"transcript_one", transcript_one},
                       {"transcript_two", transcript_two},
                       {"rubric", rubric}};
    // One retry on an unparseable judgment; transport retries happen inside post().
    for (int attempt = 0;; ++attempt) {
        try {
            return parse_judge_record(post("judge", body));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::malformed_judgment || attempt >= 1) throw;
        }
    }
}

}  // namespace affmem
