#pragma once
// Emotion-attended relevance:
//
//   R(m) = alpha * sim_sem(m, q) + (1 - alpha) * sim_emo(m, e)
//
//   sim_sem = (1 + cos(q, m.embedding)) / 2, or 0 if either vector is zero
//   sim_emo = 1 - ||e - m.emotion_context||_2 / sqrt(8)
//
// Ranking is by R descending, then newer updated_at, then id ascending.

#include <span>
#include <string>
#include <vector>

#include "affmem/domain.hpp"

namespace affmem {

class MemoryStore;
class ModelGateway;

struct RetrievalConfig {
    double alpha = 0.5;
    int k = 5;

    friend bool operator==(const RetrievalConfig&, const RetrievalConfig&) = default;
};

Violations validate(const RetrievalConfig& cfg);
void to_json(json& j, const RetrievalConfig& cfg);
void from_json(const json& j, RetrievalConfig& cfg);

struct ScoredMemory {
    std::string memory_id;
    double score = 0.0;  // R
    double sim_sem = 0.0;
    double sim_emo = 0.0;
    Timestamp updated_at = 0;

    friend bool operator==(const ScoredMemory&, const ScoredMemory&) = default;
};

void to_json(json& j, const ScoredMemory& s);

// Throws Error{dimension_mismatch}.
double sim_sem(std::span<const double> query, std::span<const double> memory);
double sim_emo(const EmotionVector& query, const EmotionVector& memory) noexcept;
double relevance(double alpha, double sem, double emo) noexcept;

// Strict weak order used by both retrieval paths.
bool ranks_before(const ScoredMemory& a, const ScoredMemory& b) noexcept;

// Top-k over the store's contiguous per-user index using a bounded heap.
std::vector<ScoredMemory> retrieve(const MemoryStore& store, const std::string& user_id,
                                   std::span<const double> query_embedding, const EmotionVector& query_emotion,
                                   const RetrievalConfig& cfg);

// Embeds query_text through the gateway first. Throws on empty text.
std::vector<ScoredMemory> retrieve(const MemoryStore& store, ModelGateway& gateway, const std::string& user_id,
                                   const std::string& query_text, const EmotionVector& query_emotion,
                                   const RetrievalConfig& cfg);

// Reference path: scores every active MemoryUnit record and sorts the lot.
std::vector<ScoredMemory> oracle_retrieve(const MemoryStore& store, const std::string& user_id,
                                          std::span<const double> query_embedding, const EmotionVector& query_emotion,
                                          const RetrievalConfig& cfg);

}  // namespace affmem
