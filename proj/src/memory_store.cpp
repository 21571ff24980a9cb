#include "affmem/memory_store.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>

#include "affmem/error.hpp"
#include "affmem/gateway.hpp"

namespace affmem {

namespace {

constexpr const char* kJournalFile = "journal.jsonl";
constexpr const char* kSnapshotFile = "snapshot.json";

std::string format_id(char prefix, std::uint64_t seq) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%08llu", prefix, static_cast<unsigned long long>(seq));
    return buf;
}

std::uint64_t id_seq(const std::string& id) {
    if (id.size() < 2) return 0;
    try {
        return std::stoull(id.substr(1));
    } catch (const std::exception&) {
        return 0;
    }
}

}  // namespace

Violations validate(const StoreConfig& cfg) {
    Violations out;
    if (cfg.embedding_dim < 1) out.emplace_back("embedding_dim must be >= 1");
    if (cfg.snapshot_interval < 1) out.emplace_back("snapshot_interval must be positive");
    return out;
}

MemoryStore::MemoryStore(StoreConfig cfg, ModelGateway& embedder) : cfg_(std::move(cfg)), embedder_(embedder) {
    if (auto v = validate(cfg_); !v.empty()) throw Error(ErrorCode::invalid_argument, v.front());
    if (embedder_.embedding_dim() != cfg_.embedding_dim) {
        throw Error(ErrorCode::dimension_mismatch, "gateway embeds into " + std::to_string(embedder_.embedding_dim()) +
                                                       " dimensions, store expects " + std::to_string(cfg_.embedding_dim));
    }
    if (!cfg_.persistence_path.empty()) load();
}

MemoryStore::~MemoryStore() = default;

// --- persistence ---------------------------------------------------------------------

void MemoryStore::load() {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg_.persistence_path, ec);
    if (ec) throw Error(ErrorCode::storage_unavailable, "cannot create " + cfg_.persistence_path.string() + ": " + ec.message());

    const fs::path snap = cfg_.persistence_path / kSnapshotFile;
    if (fs::exists(snap)) {
        std::ifstream in(snap);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::storage_unavailable, "corrupt snapshot: " + std::string(e.what()));
        }
        if (j.value("schema_version", 0) != kStoreSchemaVersion) {
            throw Error(ErrorCode::storage_unavailable, "unsupported snapshot schema_version");
        }
        memory_seq_ = j.at("memory_seq").get<std::uint64_t>();
        node_seq_ = j.at("node_seq").get<std::uint64_t>();
        for (const auto& u : j.at("memories")) apply_unit(u.get<MemoryUnit>());
        graph_ = GraphStore::from_json(j.at("graph"));
        snapshot_covers_ = j.at("journal_entries").get<std::size_t>();
    }

    const fs::path journal_path = cfg_.persistence_path / kJournalFile;
    if (fs::exists(journal_path) && !fs::is_regular_file(journal_path)) {
        throw Error(ErrorCode::storage_unavailable, journal_path.string() + " is not a regular file");
    }
    if (fs::exists(journal_path)) {
        std::ifstream in(journal_path);
        std::vector<std::string> lines;
        for (std::string line; std::getline(in, line);) {
            if (!line.empty()) lines.push_back(std::move(line));
        }
        for (std::size_t i = 0; i < lines.size(); ++i) {
            json entry;
            try {
                entry = json::parse(lines[i]);
            } catch (const json::exception&) {
                if (i + 1 == lines.size()) {
                    lines.pop_back();  // torn tail
                    break;
                }
                throw Error(ErrorCode::storage_unavailable, "corrupt journal line " + std::to_string(i + 1));
            }
            if (i >= snapshot_covers_) apply_journal_entry(entry);
        }
        journal_entries_ = lines.size();
        if (journal_entries_ < snapshot_covers_) {
            throw Error(ErrorCode::storage_unavailable, "journal shorter than snapshot position");
        }
        // Rewrite without the torn tail so appends start on a clean line.
        std::ofstream rewrite(journal_path, std::ios::trunc);
        for (const auto& l : lines) rewrite << l << '\n';
    }

    journal_.open(journal_path, std::ios::app);
    if (!journal_) throw Error(ErrorCode::storage_unavailable, "cannot open journal " + journal_path.string());
}

void MemoryStore::apply_journal_entry(const json& entry) {
    if (entry.value("schema_version", 0) != kStoreSchemaVersion) {
        throw Error(ErrorCode::storage_unavailable, "unsupported journal schema_version");
    }
    const auto op = entry.at("op").get<std::string>();
    const json& payload = entry.at("payload");
    if (op == "add_memory" || op == "update_memory" || op == "delete_memory") {
        apply_unit(payload.get<MemoryUnit>());
    } else if (op == "upsert_node") {
        const auto node = payload.get<GraphNode>();
        graph_.restore_node(node);
        node_seq_ = std::max(node_seq_, id_seq(node.id));
    } else if (op == "add_edge") {
        graph_.add_edge(payload.get<GraphEdge>());
    } else {
        throw Error(ErrorCode::storage_unavailable, "unknown journal op '" + op + "'");
    }
}

void MemoryStore::append_journal(const std::string& op, const json& payload, Timestamp ts) {
    if (cfg_.persistence_path.empty()) {
        ++journal_entries_;
        return;
    }
    const json entry = {{"schema_version", kStoreSchemaVersion}, {"op", op}, {"payload", payload}, {"ts", ts}};
    const std::string line = entry.dump() + "\n";
    journal_.write(line.data(), static_cast<std::streamsize>(line.size()));
    journal_.flush();
    if (!journal_) {
        journal_.clear();
        throw Error(ErrorCode::storage_unavailable, "journal append failed: " + std::string(std::strerror(errno)));
    }
    ++journal_entries_;
}

void MemoryStore::maybe_snapshot() {
    if (cfg_.persistence_path.empty()) return;
    if (journal_entries_ - snapshot_covers_ < static_cast<std::size_t>(cfg_.snapshot_interval)) return;
    try {
        write_snapshot();
    } catch (const Error&) {
        // The journal already holds the entry; the next write retries the snapshot.
    }
}

json MemoryStore::state_json() const {
    std::shared_lock lock(mu_);
    json memories = json::array();
    for (const auto& [_, u] : units_) memories.push_back(u);
    return json{{"schema_version", kStoreSchemaVersion},
                {"memory_seq", memory_seq_},
                {"node_seq", node_seq_},
                {"memories", std::move(memories)},
                {"graph", graph_.to_json()}};
}

void MemoryStore::write_snapshot() {
    json memories = json::array();
    for (const auto& [_, u] : units_) memories.push_back(u);
    const json j = {{"schema_version", kStoreSchemaVersion},
                    {"memory_seq", memory_seq_},
                    {"node_seq", node_seq_},
                    {"memories", std::move(memories)},
                    {"graph", graph_.to_json()},
                    {"journal_entries", journal_entries_}};
    const auto tmp = cfg_.persistence_path / (std::string(kSnapshotFile) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump() << '\n';
        out.flush();
        if (!out) throw Error(ErrorCode::storage_unavailable, "snapshot write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, cfg_.persistence_path / kSnapshotFile, ec);
    if (ec) throw Error(ErrorCode::storage_unavailable, "snapshot rename failed: " + ec.message());
    snapshot_covers_ = journal_entries_;
}

void MemoryStore::snapshot() {
    std::unique_lock lock(mu_);
    if (!cfg_.persistence_path.empty()) write_snapshot();
}

// --- index ---------------------------------------------------------------------------------

void MemoryStore::index_upsert(const MemoryUnit& m) {
    UserIndex& ui = index_[m.user_id];
    const std::size_t dim = cfg_.embedding_dim;
    auto it = ui.pos.find(m.id);
    std::size_t row;
    if (it == ui.pos.end()) {
        row = ui.ids.size();
        ui.pos.emplace(m.id, row);
        ui.ids.push_back(m.id);
        ui.embeddings.resize(ui.embeddings.size() + dim);
        ui.emotions.push_back({});
        ui.updated_at.push_back(0);
    } else {
        row = it->second;
    }
    std::copy(m.embedding.begin(), m.embedding.end(), ui.embeddings.begin() + static_cast<std::ptrdiff_t>(row * dim));
    ui.emotions[row] = m.emotion_context;
    ui.updated_at[row] = m.updated_at;
}

void MemoryStore::index_erase(const MemoryUnit& m) {
    auto uit = index_.find(m.user_id);
    if (uit == index_.end()) return;
    UserIndex& ui = uit->second;
    auto it = ui.pos.find(m.id);
    if (it == ui.pos.end()) return;
    const std::size_t row = it->second;
    const std::size_t last = ui.ids.size() - 1;
    const std::size_t dim = cfg_.embedding_dim;
    if (row != last) {
        ui.ids[row] = ui.ids[last];
        std::copy_n(ui.embeddings.begin() + static_cast<std::ptrdiff_t>(last * dim), dim,
                    ui.embeddings.begin() + static_cast<std::ptrdiff_t>(row * dim));
        ui.emotions[row] = ui.emotions[last];
        ui.updated_at[row] = ui.updated_at[last];
        ui.pos[ui.ids[row]] = row;
    }
    ui.ids.pop_back();
    ui.embeddings.resize(last * dim);
    ui.emotions.pop_back();
    ui.updated_at.pop_back();
    ui.pos.erase(it);
}

void MemoryStore::apply_unit(const MemoryUnit& m) {
    if (m.embedding.size() != cfg_.embedding_dim) {
        throw Error(ErrorCode::storage_unavailable, "stored unit " + m.id + " has wrong embedding dimension");
    }
    units_[m.id] = m;
    memory_seq_ = std::max(memory_seq_, id_seq(m.id));
    if (m.status == MemoryStatus::active) {
        index_upsert(m);
    } else {
        index_erase(m);
    }
}

Violations MemoryStore::check_index_coherence() const {
    std::shared_lock lock(mu_);
    Violations out;
    std::size_t active = 0;
    for (const auto& [id, u] : units_) {
        auto uit = index_.find(u.user_id);
        const bool indexed = uit != index_.end() && uit->second.pos.count(id) > 0;
        if (u.status == MemoryStatus::active) {
            ++active;
            if (!indexed) {
                out.push_back("active unit " + id + " missing from index");
                continue;
            }
            const UserIndex& ui = uit->second;
            const std::size_t row = ui.pos.at(id);
            const auto begin = ui.embeddings.begin() + static_cast<std::ptrdiff_t>(row * cfg_.embedding_dim);
            if (!std::equal(u.embedding.begin(), u.embedding.end(), begin) || ui.emotions[row] != u.emotion_context ||
                ui.updated_at[row] != u.updated_at) {
                out.push_back("index row for " + id + " is stale");
            }
        } else if (indexed) {
            out.push_back("deleted unit " + id + " still indexed");
        }
    }
    std::size_t indexed_rows = 0;
    for (const auto& [_, ui] : index_) indexed_rows += ui.ids.size();
    if (indexed_rows != active) out.emplace_back("index row count differs from active unit count");
    return out;
}

// --- memory operations -----------------------------------------------------------------------

std::string MemoryStore::next_memory_id() { return format_id('m', memory_seq_ + 1); }
std::string MemoryStore::next_node_id() { return format_id('n', node_seq_ + 1); }

std::vector<double> MemoryStore::embed_checked(const std::string& content) {
    auto v = embedder_.embed(content);
    if (v.size() != cfg_.embedding_dim) {
        throw Error(ErrorCode::dimension_mismatch, "embedding has dimension " + std::to_string(v.size()));
    }
    return v;
}

MemoryUnit MemoryStore::add_memory(const std::string& user_id, const std::string& content,
                                   const EmotionVector& emotion_context, Timestamp now) {
    if (user_id.empty()) throw Error(ErrorCode::invalid_argument, "add_memory: empty user_id");
    if (content.empty()) throw Error(ErrorCode::invalid_argument, "add_memory: empty content");
    if (auto v = validate(emotion_context); !v.empty()) throw Error(ErrorCode::invalid_argument, "add_memory: " + v.front());
    auto embedding = embed_checked(content);

    std::unique_lock lock(mu_);
    MemoryUnit m;
    m.id = next_memory_id();
    m.user_id = user_id;
    m.content = content;
    m.embedding = std::move(embedding);
    m.emotion_context = emotion_context;
    m.created_at = now;
    m.updated_at = now;
    m.version = 1;
    m.status = MemoryStatus::active;
    append_journal("add_memory", m, now);
    apply_unit(m);
    maybe_snapshot();
    return m;
}

MemoryUnit MemoryStore::update_memory(const std::string& id, const std::optional<std::string>& new_content,
                                      const std::optional<EmotionVector>& new_emotion, Timestamp now) {
    if (new_content && new_content->empty()) throw Error(ErrorCode::invalid_argument, "update_memory: empty content");
    if (new_emotion) {
        if (auto v = validate(*new_emotion); !v.empty()) throw Error(ErrorCode::invalid_argument, "update_memory: " + v.front());
    }
    std::optional<std::vector<double>> embedding;
    if (new_content) embedding = embed_checked(*new_content);

    std::unique_lock lock(mu_);
    auto it = units_.find(id);
    if (it == units_.end()) throw Error(ErrorCode::not_found, "memory " + id);
    if (it->second.status == MemoryStatus::deleted) throw Error(ErrorCode::deleted, "memory " + id);
    MemoryUnit m = it->second;
    if (new_content) {
        m.content = *new_content;
        m.embedding = std::move(*embedding);
    }
    if (new_emotion) m.emotion_context = *new_emotion;
    m.updated_at = now;
    m.version += 1;
    append_journal("update_memory", m, now);
    apply_unit(m);
    maybe_snapshot();
    return m;
}

void MemoryStore::delete_memory(const std::string& id, Timestamp now) {
    std::unique_lock lock(mu_);
    auto it = units_.find(id);
    if (it == units_.end() || it->second.status == MemoryStatus::deleted) throw Error(ErrorCode::not_found, "memory " + id);
    MemoryUnit m = it->second;
    m.status = MemoryStatus::deleted;
    m.updated_at = std::max(m.updated_at, now);
    append_journal("delete_memory", m, now);
    apply_unit(m);
    maybe_snapshot();
}

std::optional<MemoryUnit> MemoryStore::get(const std::string& id) const {
    std::shared_lock lock(mu_);
    ++reads_;
    if (auto it = units_.find(id); it != units_.end()) return it->second;
    return std::nullopt;
}

std::vector<MemoryUnit> MemoryStore::active_units(const std::string& user_id) const {
    std::shared_lock lock(mu_);
    ++reads_;
    std::vector<MemoryUnit> out;
    for (const auto& [_, u] : units_) {
        if (u.user_id == user_id && u.status == MemoryStatus::active) out.push_back(u);
    }
    return out;
}

// --- graph operations -----------------------------------------------------------------------------

GraphNode MemoryStore::upsert_node(const std::string& user_id, NodeKind kind, const std::string& name,
                                   const std::map<std::string, std::string>& attributes, Timestamp now) {
    if (user_id.empty()) throw Error(ErrorCode::invalid_argument, "upsert_node: empty user_id");
    if (name.empty()) throw Error(ErrorCode::invalid_argument, "upsert_node: empty name");
    std::unique_lock lock(mu_);
    GraphNode node;
    if (auto existing = graph_.find_node(user_id, kind, name)) {
        node = *existing;
        for (const auto& [k, v] : attributes) node.attributes[k] = v;
    } else {
        node = GraphNode{next_node_id(), user_id, kind, name, attributes, now};
    }
    append_journal("upsert_node", node, now);
    graph_.restore_node(node);
    node_seq_ = std::max(node_seq_, id_seq(node.id));
    maybe_snapshot();
    return node;
}

GraphEdge MemoryStore::add_edge(const std::string& from, const std::string& to, EdgeType type, Timestamp ts) {
    std::unique_lock lock(mu_);
    GraphEdge e{from, to, type, ts};
    graph_.check_edge(e);
    append_journal("add_edge", e, ts);
    graph_.add_edge(e);
    maybe_snapshot();
    return e;
}

Subgraph MemoryStore::neighborhood(const std::string& node_id, int hops) const {
    std::shared_lock lock(mu_);
    ++reads_;
    return graph_.neighborhood(node_id, hops);
}

std::vector<ThemeEvent> MemoryStore::theme_trajectory(const std::string& user_id, const std::string& theme_name) const {
    std::shared_lock lock(mu_);
    ++reads_;
    return graph_.theme_trajectory(user_id, theme_name);
}

std::vector<std::string> MemoryStore::graph_facts(const std::string& user_id) const {
    std::shared_lock lock(mu_);
    ++reads_;
    return graph_.render_facts(user_id);
}

}  // namespace affmem
