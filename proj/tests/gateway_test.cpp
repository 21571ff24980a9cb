#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "affmem/error.hpp"
#include "affmem/gateway.hpp"
#include "affmem/retrieval.hpp"
#include "support.hpp"

using namespace affmem;

namespace {

std::string policy_context(const std::string& sequencing, bool advice, int steps, const std::string& memory = "") {
    std::string s = "EMOTION\nINTENT\nMEMORIES\n";
    if (!memory.empty()) s += "1. (R=0.9000 sem=0.9000 emo=0.9000) [m00000001] " + memory + "\n";
    s += "RELATIONS\nPOLICY\nsequencing=" + sequencing + "\n";
    s += std::string("advice_allowed=") + (advice ? "true" : "false") + "\n";
    s += "max_plan_steps=" + std::to_string(steps) + "\nmax_density=1200\nTURN\nwhat should i do tonight\n";
    return s;
}

Scenario scenario_of(int max_turns, std::vector<std::string> fallback) {
    return Scenario{"S99", ScenarioCategory::meaningful, "obj", "opening", max_turns, std::move(fallback)};
}

JudgeRecord sample_judgment() {
    JudgeRecord r;
    r.scenario_id = "S01";
    r.preferred = Slot::two;
    r.confidence = 0.8;
    r.scores_one = {3, 3, 3, 3, 3};
    r.scores_two = {4, 4.5, 4, 4, 5};
    return r;
}

}  // namespace

TEST(StubEmbed, DeterministicAndNormalised) {
    StubGateway a(1), b(99);
    const auto v = a.embed("exam stress tonight");
    EXPECT_EQ(v, b.embed("exam stress tonight"));  // seed does not affect embeddings
    double n = 0;
    for (double x : v) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-12);
    EXPECT_EQ(v.size(), 64u);
}

TEST(StubEmbed, SharedWordsAreCloser) {
    StubGateway g;
    const auto q = g.embed("exam stress");
    EXPECT_GT(sim_sem(q, g.embed("exam stress tonight")), sim_sem(q, g.embed("pasta recipe")));
}

TEST(StubEmbed, OnlyStopWordsGiveZeroVector) {
    StubGateway g;
    for (double x : g.embed("it is the")) EXPECT_EQ(x, 0.0);
    EXPECT_THROW(g.embed(""), Error);
}

TEST(StubEmotion, LexiconHitScoresAnxiety) {
    StubGateway g;
    const auto s = g.detect_text_emotion("I'm panicking about the exam");
    EXPECT_GT(s.vector[EmotionCategory::anxiety], 0.0);
    EXPECT_EQ(s.confidence, 0.8);
    EXPECT_EQ(s.modality, Modality::text);
}

TEST(StubEmotion, NeutralTextIsZeroAtLowConfidence) {
    StubGateway g;
    const auto s = g.detect_text_emotion("the train leaves at nine");
    EXPECT_EQ(s.vector, EmotionVector{});
    EXPECT_EQ(s.confidence, 0.3);
}

TEST(StubGenerate, NoAdviceMeansNoPlan) {
    StubGateway g;
    const auto out = g.generate(policy_context("validation,reflection", false, 0));
    EXPECT_EQ(out.find(stub_markers::plan), std::string::npos);
    EXPECT_NE(out.find(stub_markers::validation), std::string::npos);
}

TEST(StubGenerate, CitesTopMemoryAndCapsSteps) {
    StubGateway g;
    const auto out = g.generate(policy_context("validation,plan", true, 3, "Prefers step-by-step plans"));
    EXPECT_NE(out.find("Prefers step-by-step plans"), std::string::npos) << out;
    EXPECT_NE(out.find("Step 3:"), std::string::npos);
    EXPECT_EQ(out.find("Step 4:"), std::string::npos);
    EXPECT_EQ(out.find(".."), std::string::npos);
}

TEST(StubGenerate, BareTranscriptGetsGenericReply) {
    StubGateway g;
    const auto out = g.generate("user: i am tired\n");
    EXPECT_EQ(out.rfind(stub_markers::generic, 0), 0u);
    EXPECT_EQ(out.find(stub_markers::memory), std::string::npos);
}

TEST(StubSimulator, OpeningThenScriptThenDone) {
    StubGateway g;
    const auto sc = scenario_of(12, {"two", "three"});
    Transcript t;
    auto turn = g.simulate_user({}, t, sc);
    EXPECT_EQ(turn.utterance, "opening");
    EXPECT_FALSE(turn.done);
    t.push_back({Speaker::user, "opening"});
    t.push_back({Speaker::assistant, "ok"});
    turn = g.simulate_user({}, t, sc);
    EXPECT_EQ(turn.utterance, "two");
    EXPECT_FALSE(turn.done);
    t.push_back({Speaker::user, "two"});
    t.push_back({Speaker::assistant, "ok"});
    turn = g.simulate_user({}, t, sc);
    EXPECT_EQ(turn.utterance, "three");
    EXPECT_TRUE(turn.done);
}

TEST(StubSimulator, DoneAtMaxTurns) {
    StubGateway g;
    const auto sc = scenario_of(2, {"a", "b", "c"});
    Transcript t{{Speaker::user, "opening"}, {Speaker::assistant, "ok"}};
    EXPECT_TRUE(g.simulate_user({}, t, sc).done);
}

TEST(StubJudge, DeterministicAndValid) {
    StubGateway a(7), b(7);
    const std::string one = "user: x\nassistant: [response] generic\n";
    const std::string two = "user: x\nassistant: [validation] ok [memory] You mentioned before: y.\n";
    const auto r = a.judge("S01", one, two, default_rubric());
    EXPECT_EQ(r, b.judge("S01", one, two, default_rubric()));
    EXPECT_TRUE(validate(r).empty());
    EXPECT_EQ(r.preferred, Slot::two);
    for (auto c : kAllCriteria) {
        const auto i = static_cast<std::size_t>(c);
        EXPECT_GE(r.scores_one[i], 1.0);
        EXPECT_LE(r.scores_two[i], 5.0);
    }
}

TEST(StubJudge, SwappingSlotsSwapsPreference) {
    StubGateway g(3);
    const std::string plain = "user: x\nassistant: [response] generic\n";
    const std::string rich = "user: x\nassistant: [validation] ok [plan] Step 1: a. [memory] m.\n";
    EXPECT_EQ(g.judge("S02", plain, rich, "").preferred, Slot::two);
    EXPECT_EQ(g.judge("S02", rich, plain, "").preferred, Slot::one);
}

TEST(JudgeRecordParse, MalformedInputs) {
    const json good = sample_judgment();
    EXPECT_EQ(parse_judge_record(good), sample_judgment());
    auto expect_malformed = [](const json& j) {
        try {
            parse_judge_record(j);
            ADD_FAILURE() << j.dump();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::malformed_judgment);
        }
    };
    expect_malformed(json::array());
    auto j = good;
    j["preferred"] = "three";
    expect_malformed(j);
    j = good;
    j.erase("scores");
    expect_malformed(j);
    j = good;
    j["confidence"] = 1.5;
    expect_malformed(j);
    j = good;
    j["scores"]["one"]["tone"] = 4.25;
    expect_malformed(j);
    j = good;
    j["scores"]["two"]["tone"] = 6;
    expect_malformed(j);
}

TEST(GatewayConfigValidate, HttpNeedsEndpoint) {
    GatewayConfig c;
    c.backend = Backend::http;
    EXPECT_FALSE(validate(c).empty());
    EXPECT_THROW(make_gateway(c), Error);
    c.endpoint = "http://127.0.0.1:1";
    EXPECT_TRUE(validate(c).empty());
    EXPECT_NE(make_gateway(GatewayConfig{}), nullptr);
}

// --- http backend against a local fake ----------------------------------------------

class FakeBackend : public ::testing::Test {
protected:
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> failures_left{0};
    std::atomic<int> malformed_left{0};
    std::atomic<int> hits{0};
    std::string last_auth;
    std::mutex mu;

    void SetUp() override {
        server.Post("/api/embed", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            {
                std::lock_guard lock(mu);
                last_auth = req.get_header_value("Authorization");
            }
            if (failures_left.fetch_sub(1) > 0) {
                res.status = 503;
                return;
            }
            res.set_content(json{{"embedding", {0.6, 0.8, 0.0}}}.dump(), "application/json");
        });
        server.Post("/api/judge", [this](const httplib::Request&, httplib::Response& res) {
            ++hits;
            if (malformed_left.fetch_sub(1) > 0) {
                res.set_content("{\"preferred\":", "application/json");
                return;
            }
            res.set_content(json(sample_judgment()).dump(), "application/json");
        });
        server.Post("/api/generate", [this](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 400;
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    void TearDown() override {
        server.stop();
        thread.join();
        ::unsetenv("AFFMEM_TEST_TOKEN");
    }

    HttpGateway gateway(int retries = 2) {
        GatewayConfig c;
        c.backend = Backend::http;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/api/";
        c.max_retries = retries;
        c.backoff_base_ms = 1;
        c.backoff_cap_ms = 4;
        c.timeout_ms = 2000;
        c.embedding_dim = 3;
        c.token_env = "AFFMEM_TEST_TOKEN";
        return HttpGateway(c);
    }
};

TEST_F(FakeBackend, RetriesServerErrors) {
    failures_left = 2;
    auto g = gateway(2);
    EXPECT_EQ(g.embed("hello"), (std::vector<double>{0.6, 0.8, 0.0}));
    EXPECT_EQ(g.attempts(), 3u);
}

TEST_F(FakeBackend, ExhaustedRetriesAreBackendUnavailable) {
    failures_left = 10;
    auto g = gateway(1);
    try {
        g.embed("hello");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::backend_unavailable);
    }
    EXPECT_EQ(hits.load(), 2);
}

TEST_F(FakeBackend, ClientErrorIsNotRetried) {
    auto g = gateway(3);
    EXPECT_THROW(g.generate("x"), Error);
    EXPECT_EQ(hits.load(), 1);
}

TEST_F(FakeBackend, DimensionMismatchIsReported) {
    GatewayConfig c;
    c.backend = Backend::http;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/api";
    c.embedding_dim = 4;
    HttpGateway g(c);
    try {
        g.embed("hello");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    }
}

TEST_F(FakeBackend, MalformedJudgmentRetriedOnce) {
    malformed_left = 1;
    auto g = gateway();
    EXPECT_EQ(g.judge("S01", "a", "b", "r"), sample_judgment());
    EXPECT_EQ(hits.load(), 2);
}

TEST_F(FakeBackend, MalformedTwiceFails) {
    malformed_left = 2;
    auto g = gateway();
    try {
        g.judge("S01", "a", "b", "r");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::malformed_judgment);
    }
}

TEST_F(FakeBackend, BearerTokenFromEnvironment) {
    ::setenv("AFFMEM_TEST_TOKEN", "sekret", 1);
    auto g = gateway();
    g.embed("hello");
    std::lock_guard lock(mu);
    EXPECT_EQ(last_auth, "Bearer sekret");
}

TEST(HttpGatewayTransport, UnreachableHostIsBackendUnavailable) {
    GatewayConfig c;
    c.backend = Backend::http;
    c.endpoint = "http://127.0.0.1:1";
    c.max_retries = 1;
    c.backoff_base_ms = 1;
    c.timeout_ms = 500;
    HttpGateway g(c);
    try {
        g.embed("x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::backend_unavailable);
    }
}
