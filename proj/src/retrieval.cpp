#include "affmem/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "affmem/error.hpp"
#include "affmem/gateway.hpp"
#include "affmem/memory_store.hpp"

namespace affmem {

Violations validate(const RetrievalConfig& cfg) {
    Violations out;
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) out.emplace_back("alpha must be in [0,1]");
    if (cfg.k < 1) out.emplace_back("k must be >= 1");
    return out;
}

void to_json(json& j, const RetrievalConfig& cfg) { j = json{{"alpha", cfg.alpha}, {"k", cfg.k}}; }

void from_json(const json& j, RetrievalConfig& cfg) {
    cfg = RetrievalConfig{};
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.k = j.value("k", cfg.k);
}

void to_json(json& j, const ScoredMemory& s) {
    j = json{{"memory_id", s.memory_id}, {"score", s.score}, {"sim_sem", s.sim_sem}, {"sim_emo", s.sim_emo}};
}

double sim_sem(std::span<const double> query, std::span<const double> memory) {
    if (query.size() != memory.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "query has " + std::to_string(query.size()) + " dims, memory has " + std::to_string(memory.size()));
    }
    double dot = 0.0;
    double qq = 0.0;
    double mm = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
        dot += query[i] * memory[i];
        qq += query[i] * query[i];
        mm += memory[i] * memory[i];
    }
    if (qq == 0.0 || mm == 0.0) return 0.0;
    const double cosine = std::clamp(dot / (std::sqrt(qq) * std::sqrt(mm)), -1.0, 1.0);
    return (1.0 + cosine) / 2.0;
}

double sim_emo(const EmotionVector& query, const EmotionVector& memory) noexcept {
    double d2 = 0.0;
    for (std::size_t i = 0; i < kEmotionCategoryCount; ++i) {
        const double d = query.components[i] - memory.components[i];
        d2 += d * d;
    }
    static const double max_distance = std::sqrt(static_cast<double>(kEmotionCategoryCount));
    return std::clamp(1.0 - std::sqrt(d2) / max_distance, 0.0, 1.0);
}

double relevance(double alpha, double sem, double emo) noexcept {
    return std::clamp(alpha * sem + (1.0 - alpha) * emo, 0.0, 1.0);
}

bool ranks_before(const ScoredMemory& a, const ScoredMemory& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    if (a.updated_at != b.updated_at) return a.updated_at > b.updated_at;
    return a.memory_id < b.memory_id;
}

namespace {

void check_inputs(std::span<const double> query_embedding, const EmotionVector& query_emotion, const RetrievalConfig& cfg,
                  std::size_t dim) {
    if (auto v = validate(cfg); !v.empty()) throw Error(ErrorCode::invalid_argument, v.front());
    if (auto v = validate(query_emotion); !v.empty()) throw Error(ErrorCode::invalid_argument, "query emotion: " + v.front());
    if (query_embedding.size() != dim) {
        throw Error(ErrorCode::dimension_mismatch,
                    "query has " + std::to_string(query_embedding.size()) + " dims, store has " + std::to_string(dim));
    }
}

}  // namespace

std::vector<ScoredMemory> retrieve(const MemoryStore& store, const std::string& user_id,
                                   std::span<const double> query_embedding, const EmotionVector& query_emotion,
                                   const RetrievalConfig& cfg) {
    check_inputs(query_embedding, query_emotion, cfg, store.config().embedding_dim);
    const auto k = static_cast<std::size_t>(cfg.k);

    return store.with_index(user_id, [&](const IndexView& view) {
        // Max-heap on "ranks after": top() is the current worst of the kept k.
        auto worse_first = [](const ScoredMemory& a, const ScoredMemory& b) { return ranks_before(a, b); };
        std::priority_queue<ScoredMemory, std::vector<ScoredMemory>, decltype(worse_first)> heap(worse_first);

        for (std::size_t i = 0; i < view.size(); ++i) {
            ScoredMemory s;
            s.sim_sem = sim_sem(query_embedding, view.embedding(i));
            s.sim_emo = sim_emo(query_emotion, view.emotions[i]);
            s.score = relevance(cfg.alpha, s.sim_sem, s.sim_emo);
            s.updated_at = view.updated_at[i];
            if (heap.size() < k) {
                s.memory_id = view.ids[i];
                heap.push(std::move(s));
                continue;
            }
            const ScoredMemory& worst = heap.top();
            // Cheap rejection before copying the id.
            if (s.score < worst.score || (s.score == worst.score && s.updated_at < worst.updated_at)) continue;
            s.memory_id = view.ids[i];
            if (ranks_before(s, worst)) {
                heap.pop();
                heap.push(std::move(s));
            }
        }

        std::vector<ScoredMemory> out(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = heap.top();
            heap.pop();
        }
        return out;
    });
}

std::vector<ScoredMemory> retrieve(const MemoryStore& store, ModelGateway& gateway, const std::string& user_id,
                                   const std::string& query_text, const EmotionVector& query_emotion,
                                   const RetrievalConfig& cfg) {
    if (query_text.empty()) throw Error(ErrorCode::invalid_argument, "retrieve: empty query text");
    const auto q = gateway.embed(query_text);
    return retrieve(store, user_id, q, query_emotion, cfg);
}

std::vector<ScoredMemory> oracle_retrieve(const MemoryStore& store, const std::string& user_id,
                                          std::span<const double> query_embedding, const EmotionVector& query_emotion,
                                          const RetrievalConfig& cfg) {
    check_inputs(query_embedding, query_emotion, cfg, store.config().embedding_dim);
    std::vector<ScoredMemory> all;
    for (const MemoryUnit& m : store.active_units(user_id)) {
        ScoredMemory s;
        s.memory_id = m.id;
        s.sim_sem = sim_sem(query_embedding, m.embedding);
        s.sim_emo = sim_emo(query_emotion, m.emotion_context);
        s.score = relevance(cfg.alpha, s.sim_sem, s.sim_emo);
        s.updated_at = m.updated_at;
        all.push_back(std::move(s));
    }
    std::sort(all.begin(), all.end(), ranks_before);
    if (all.size() > static_cast<std::size_t>(cfg.k)) all.resize(static_cast<std::size_t>(cfg.k));
    return all;
}

}  // namespace affmem
