#pragma once
// MemoryStore: per-user long-term memory, dual-indexed by semantic embedding
// and encoding-time emotion, plus the relational graph of user facts.
//
// Persistence (when persistence_path is set) lives in that directory:
//   journal.jsonl   append-only, one {"schema_version","op","payload","ts"} per line
//   snapshot.json   full state plus the number of journal lines it covers
// Opening a store loads the snapshot and replays the journal lines after it.
// A torn final journal line (crash mid-append) is ignored.
//
// Reads take a shared lock, writes an exclusive one. Every read entry point
// bumps read_count(), which the evaluation harness uses to prove that the
// baseline condition never touches memory.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "affmem/domain.hpp"
#include "affmem/graph_store.hpp"

namespace affmem {

class ModelGateway;

inline constexpr int kStoreSchemaVersion = 1;

struct StoreConfig {
    std::size_t embedding_dim = 64;
    std::filesystem::path persistence_path;  // empty = in-memory only
    int snapshot_interval = 256;
};

Violations validate(const StoreConfig& cfg);

// Contiguous view over one user's active memories. Row i of `embeddings`
// is embeddings[i*dim, (i+1)*dim).
struct IndexView {
    std::span<const std::string> ids;
    std::span<const double> embeddings;
    std::span<const EmotionVector> emotions;
    std::span<const Timestamp> updated_at;
    std::size_t dim = 0;

    std::size_t size() const noexcept { return ids.size(); }
    std::span<const double> embedding(std::size_t i) const noexcept { return embeddings.subspan(i * dim, dim); }
};

class MemoryStore {
public:
    // Throws Error{storage_unavailable} if the persistence directory cannot be
    // opened or its contents cannot be replayed.
    MemoryStore(StoreConfig cfg, ModelGateway& embedder);
    ~MemoryStore();

    MemoryStore(const MemoryStore&) = delete;
    MemoryStore& operator=(const MemoryStore&) = delete;

    const StoreConfig& config() const noexcept { return cfg_; }

    MemoryUnit add_memory(const std::string& user_id, const std::string& content, const EmotionVector& emotion_context,
                          Timestamp now);
    MemoryUnit update_memory(const std::string& id, const std::optional<std::string>& new_content,
                             const std::optional<EmotionVector>& new_emotion, Timestamp now);
    void delete_memory(const std::string& id, Timestamp now);

    // Returns deleted units too (status tells them apart).
    std::optional<MemoryUnit> get(const std::string& id) const;
    // Active units of a user, ordered by id.
    std::vector<MemoryUnit> active_units(const std::string& user_id) const;

    // Runs fn(IndexView) under the shared lock.
    template <typename F>
    auto with_index(const std::string& user_id, F&& fn) const {
        std::shared_lock lock(mu_);
        ++reads_;
        IndexView view{};
        view.dim = cfg_.embedding_dim;
        if (auto it = index_.find(user_id); it != index_.end()) {
            const UserIndex& ui = it->second;
            view.ids = ui.ids;
            view.embeddings = ui.embeddings;
            view.emotions = ui.emotions;
            view.updated_at = ui.updated_at;
        }
        return fn(static_cast<const IndexView&>(view));
    }

    GraphNode upsert_node(const std::string& user_id, NodeKind kind, const std::string& name,
                          const std::map<std::string, std::string>& attributes, Timestamp now);
    GraphEdge add_edge(const std::string& from, const std::string& to, EdgeType type, Timestamp ts);
    Subgraph neighborhood(const std::string& node_id, int hops) const;
    std::vector<ThemeEvent> theme_trajectory(const std::string& user_id, const std::string& theme_name) const;
    std::vector<std::string> graph_facts(const std::string& user_id) const;

    // Full state in snapshot form (without the journal position).
    json state_json() const;
    // Writes a snapshot now. No-op for in-memory stores.
    void snapshot();

    std::uint64_t read_count() const noexcept { return reads_.load(); }
    std::size_t journal_entries() const noexcept { return journal_entries_; }

    // Consistency check: active units and the index agree, deleted units are
    // absent from it. Returns violations.
    Violations check_index_coherence() const;

private:
    struct UserIndex {
        std::vector<std::string> ids;
        std::vector<double> embeddings;
        std::vector<EmotionVector> emotions;
        std::vector<Timestamp> updated_at;
        std::unordered_map<std::string, std::size_t> pos;
    };

    void index_upsert(const MemoryUnit& m);
    void index_erase(const MemoryUnit& m);
    void apply_unit(const MemoryUnit& m);
    void apply_journal_entry(const json& entry);
    void append_journal(const std::string& op, const json& payload, Timestamp ts);
    void maybe_snapshot();
    void write_snapshot();
    void load();
    std::string next_memory_id();
    std::string next_node_id();
    std::vector<double> embed_checked(const std::string& content);

    StoreConfig cfg_;
    ModelGateway& embedder_;

    mutable std::shared_mutex mu_;
    mutable std::atomic<std::uint64_t> reads_{0};

    std::map<std::string, MemoryUnit> units_;
    std::unordered_map<std::string, UserIndex> index_;
    GraphStore graph_;
    std::uint64_t memory_seq_ = 0;
    std::uint64_t node_seq_ = 0;

    std::ofstream journal_;
    std::size_t journal_entries_ = 0;
    std::size_t snapshot_covers_ = 0;
};

}  // namespace affmem
