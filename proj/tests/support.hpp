#pragma once
// Shared helpers for the test binaries: scratch directories and small
// hand-rolled generators over a seeded std::mt19937_64.

#include <unistd.h>

#include <cmath>
#include <map>
#include <stdexcept>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "affmem/domain.hpp"
#include "affmem/error.hpp"
#include "affmem/gateway.hpp"

namespace affmem::testing {

inline const std::filesystem::path kDataDir = AFFMEM_DATA_DIR;
inline const std::filesystem::path kTestDir = AFFMEM_TEST_DIR;

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("affmem-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin(double p = 0.5) { return unit() < p; }

    // Components on a 0.05 grid half the time, so exact ties show up.
    EmotionVector emotion() {
        EmotionVector v;
        const bool grid = coin();
        for (auto& c : v.components) c = grid ? uniform_int(0, 20) * 0.05 : unit();
        return v;
    }

    std::vector<double> unit_vector(std::size_t dim) {
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> v(dim);
        double norm = 0.0;
        for (auto& x : v) {
            x = n(rng_);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : v) x /= norm;
        return v;
    }

    std::mt19937_64& engine() noexcept { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline EmotionVector emotion_of(std::initializer_list<std::pair<EmotionCategory, double>> items) {
    EmotionVector v;
    for (auto [c, x] : items) v[c] = x;
    return v;
}

// Stub gateway whose embeddings can be pinned per text and whose individual
// roles can be made to fail.
class ScriptedGateway : public ModelGateway {
public:
    explicit ScriptedGateway(std::size_t dim = 64, std::uint64_t seed = 0) : stub_(seed, dim) {}

    std::map<std::string, std::vector<double>> embeddings;
    bool fail_intent = false;
    bool fail_generate = false;
    bool fail_emotion = false;
    int embed_calls = 0;

    std::size_t embedding_dim() const noexcept override { return stub_.embedding_dim(); }
    std::vector<double> embed(std::string_view text) override {
        ++embed_calls;
        if (auto it = embeddings.find(std::string(text)); it != embeddings.end()) return it->second;
        return stub_.embed(text);
    }
    EmotionSignal detect_text_emotion(std::string_view text) override {
        if (fail_emotion) throw Error(ErrorCode::backend_unavailable, "emotion down");
        return stub_.detect_text_emotion(text);
    }
    IntentLabel classify_intent(std::string_view text, std::span<const UserTurn> history) override {
        if (fail_intent) throw Error(ErrorCode::backend_unavailable, "intent down");
        return stub_.classify_intent(text, history);
    }
    std::string generate(std::string_view input) override {
        if (fail_generate) throw Error(ErrorCode::backend_unavailable, "generator down");
        return stub_.generate(input);
    }
    SimulatedTurn simulate_user(const Persona& p, const Transcript& t, const Scenario& s) override {
        return stub_.simulate_user(p, t, s);
    }
    JudgeRecord judge(std::string_view sid, std::string_view one, std::string_view two, std::string_view rubric) override {
        return stub_.judge(sid, one, two, rubric);
    }

private:
    StubGateway stub_;
};

}  // namespace affmem::testing
