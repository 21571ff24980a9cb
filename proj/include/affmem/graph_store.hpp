#pragma once
// Relational store of longitudinal user facts: typed nodes joined by typed,
// timestamped edges. In-memory only; MemoryStore owns persistence.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "affmem/domain.hpp"

namespace affmem {

enum class NodeKind { person, event, stressor, preference, coping_tool, theme };
enum class EdgeType { precedes, involves, caused_by, resolved_by, recurs_as };

std::string_view to_string(NodeKind k) noexcept;
std::string_view to_string(EdgeType t) noexcept;
NodeKind parse_node_kind(std::string_view s);
EdgeType parse_edge_type(std::string_view s);

struct GraphNode {
    std::string id;
    std::string user_id;
    NodeKind kind = NodeKind::theme;
    std::string name;
    std::map<std::string, std::string> attributes;
    Timestamp created_at = 0;

    friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct GraphEdge {
    std::string from;
    std::string to;
    EdgeType type = EdgeType::involves;
    Timestamp timestamp = 0;

    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct Subgraph {
    std::vector<GraphNode> nodes;  // sorted by id
    std::vector<GraphEdge> edges;  // sorted by (from, to, type, timestamp)

    friend bool operator==(const Subgraph&, const Subgraph&) = default;
};

struct ThemeEvent {
    GraphNode event;
    Timestamp linked_at = 0;  // earliest edge joining the event to the theme
    bool resolved = false;

    friend bool operator==(const ThemeEvent&, const ThemeEvent&) = default;
};

void to_json(json& j, const GraphNode& n);
void from_json(const json& j, GraphNode& n);
void to_json(json& j, const GraphEdge& e);
void from_json(const json& j, GraphEdge& e);
void to_json(json& j, const Subgraph& g);
void to_json(json& j, const ThemeEvent& e);

class GraphStore {
public:
    // Inserts, or merges attributes into the existing (user, kind, name) node.
    // New nodes get `new_id`; the returned node carries the id actually used.
    GraphNode upsert_node(const std::string& user_id, NodeKind kind, const std::string& name,
                          const std::map<std::string, std::string>& attributes, Timestamp now, const std::string& new_id);
    // Checks the edge against the current nodes; throws on failure.
    void check_edge(const GraphEdge& e) const;
    void add_edge(const GraphEdge& e);

    std::optional<GraphNode> find_node(const std::string& id) const;
    std::optional<GraphNode> find_node(const std::string& user_id, NodeKind kind, const std::string& name) const;

    Subgraph neighborhood(const std::string& node_id, int hops) const;
    std::vector<ThemeEvent> theme_trajectory(const std::string& user_id, const std::string& theme_name) const;
    // One readable statement per edge owned by the user, oldest first.
    std::vector<std::string> render_facts(const std::string& user_id) const;

    // Re-applies a node exactly as stored (journal replay / snapshot load).
    void restore_node(const GraphNode& n);

    json to_json() const;
    static GraphStore from_json(const json& j);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }

private:
    std::map<std::string, GraphNode> nodes_;
    std::vector<GraphEdge> edges_;
    // (user_id, kind, name) -> node id
    std::map<std::tuple<std::string, NodeKind, std::string>, std::string> by_key_;
};

}  // namespace affmem
