#include "affmem/graph_store.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <tuple>

#include "affmem/error.hpp"

namespace affmem {

std::string_view to_string(NodeKind k) noexcept {
    switch (k) {
        case NodeKind::person: return "person";
        case NodeKind::event: return "event";
        case NodeKind::stressor: return "stressor";
        case NodeKind::preference: return "preference";
        case NodeKind::coping_tool: return "coping_tool";
        case NodeKind::theme: return "theme";
    }
    return "unknown";
}

std::string_view to_string(EdgeType t) noexcept {
    switch (t) {
        case EdgeType::precedes: return "precedes";
        case EdgeType::involves: return "involves";
        case EdgeType::caused_by: return "caused_by";
        case EdgeType::resolved_by: return "resolved_by";
        case EdgeType::recurs_as: return "recurs_as";
    }
    return "unknown";
}

NodeKind parse_node_kind(std::string_view s) {
    for (auto k : {NodeKind::person, NodeKind::event, NodeKind::stressor, NodeKind::preference, NodeKind::coping_tool,
                   NodeKind::theme}) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorCode::invalid_argument, "unknown node kind '" + std::string(s) + "'");
}

EdgeType parse_edge_type(std::string_view s) {
    for (auto t : {EdgeType::precedes, EdgeType::involves, EdgeType::caused_by, EdgeType::resolved_by,
                   EdgeType::recurs_as}) {
        if (to_string(t) == s) return t;
    }
    throw Error(ErrorCode::invalid_argument, "unknown edge type '" + std::string(s) + "'");
}

void to_json(json& j, const GraphNode& n) {
    j = json{{"id", n.id},
             {"user_id", n.user_id},
             {"kind", to_string(n.kind)},
             {"name", n.name},
             {"attributes", n.attributes},
             {"created_at", n.created_at}};
}

void from_json(const json& j, GraphNode& n) {
    n.id = j.at("id").get<std::string>();
    n.user_id = j.at("user_id").get<std::string>();
    n.kind = parse_node_kind(j.at("kind").get<std::string>());
    n.name = j.at("name").get<std::string>();
    n.attributes = j.value("attributes", std::map<std::string, std::string>{});
    n.created_at = j.at("created_at").get<Timestamp>();
}

void to_json(json& j, const GraphEdge& e) {
    j = json{{"from", e.from}, {"to", e.to}, {"type", to_string(e.type)}, {"timestamp", e.timestamp}};
}

void from_json(const json& j, GraphEdge& e) {
    e.from = j.at("from").get<std::string>();
    e.to = j.at("to").get<std::string>();
    e.type = parse_edge_type(j.at("type").get<std::string>());
    e.timestamp = j.at("timestamp").get<Timestamp>();
}

void to_json(json& j, const Subgraph& g) { j = json{{"nodes", g.nodes}, {"edges", g.edges}}; }

void to_json(json& j, const ThemeEvent& e) {
    j = json{{"event", e.event}, {"linked_at", e.linked_at}, {"resolved", e.resolved}};
}

GraphNode GraphStore::upsert_node(const std::string& user_id, NodeKind kind, const std::string& name,
                                  const std::map<std::string, std::string>& attributes, Timestamp now,
                                  const std::string& new_id) {
    if (user_id.empty()) throw Error(ErrorCode::invalid_argument, "upsert_node: empty user_id");
    if (name.empty()) throw Error(ErrorCode::invalid_argument, "upsert_node: empty name");
    auto key = std::make_tuple(user_id, kind, name);
    if (auto it = by_key_.find(key); it != by_key_.end()) {
        GraphNode& node = nodes_.at(it->second);
        for (const auto& [k, v] : attributes) node.attributes[k] = v;
        return node;
    }
    GraphNode node{new_id, user_id, kind, name, attributes, now};
    nodes_.emplace(new_id, node);
    by_key_.emplace(std::move(key), new_id);
    return node;
}

void GraphStore::restore_node(const GraphNode& n) {
    if (auto old = nodes_.find(n.id); old != nodes_.end()) {
        by_key_.erase(std::make_tuple(old->second.user_id, old->second.kind, old->second.name));
    }
    nodes_[n.id] = n;
    by_key_[std::make_tuple(n.user_id, n.kind, n.name)] = n.id;
}

void GraphStore::check_edge(const GraphEdge& e) const {
    auto from = nodes_.find(e.from);
    auto to = nodes_.find(e.to);
    if (from == nodes_.end()) throw Error(ErrorCode::not_found, "edge endpoint " + e.from);
    if (to == nodes_.end()) throw Error(ErrorCode::not_found, "edge endpoint " + e.to);
    if (from->second.user_id != to->second.user_id) {
        throw Error(ErrorCode::invalid_argument, "edge endpoints belong to different users");
    }
    if (e.type == EdgeType::precedes && e.from == e.to) {
        throw Error(ErrorCode::invalid_argument, "self-loop of type precedes");
    }
}

void GraphStore::add_edge(const GraphEdge& e) {
    check_edge(e);
    edges_.push_back(e);
}

std::optional<GraphNode> GraphStore::find_node(const std::string& id) const {
    if (auto it = nodes_.find(id); it != nodes_.end()) return it->second;
    return std::nullopt;
}

std::optional<GraphNode> GraphStore::find_node(const std::string& user_id, NodeKind kind, const std::string& name) const {
    if (auto it = by_key_.find(std::make_tuple(user_id, kind, name)); it != by_key_.end()) return nodes_.at(it->second);
    return std::nullopt;
}

Subgraph GraphStore::neighborhood(const std::string& node_id, int hops) const {
    if (hops < 1) throw Error(ErrorCode::invalid_argument, "hops must be >= 1");
    if (!nodes_.count(node_id)) throw Error(ErrorCode::not_found, "node " + node_id);

    std::map<std::string, std::vector<std::string>> adjacent;
    for (const auto& e : edges_) {
        adjacent[e.from].push_back(e.to);
        adjacent[e.to].push_back(e.from);
    }

    std::map<std::string, int> depth{{node_id, 0}};
    std::deque<std::string> frontier{node_id};
    while (!frontier.empty()) {
        const std::string cur = frontier.front();
        frontier.pop_front();
        const int d = depth[cur];
        if (d == hops) continue;
        for (const auto& next : adjacent[cur]) {
            if (depth.emplace(next, d + 1).second) frontier.push_back(next);
        }
    }

    Subgraph out;
    for (const auto& [id, _] : depth) out.nodes.push_back(nodes_.at(id));
    for (const auto& e : edges_) {
        if (depth.count(e.from) && depth.count(e.to)) out.edges.push_back(e);
    }
    std::sort(out.edges.begin(), out.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
        return std::tie(a.from, a.to, a.type, a.timestamp) < std::tie(b.from, b.to, b.type, b.timestamp);
    });
    return out;
}

std::vector<ThemeEvent> GraphStore::theme_trajectory(const std::string& user_id, const std::string& theme_name) const {
    const auto theme = find_node(user_id, NodeKind::theme, theme_name);
    if (!theme) throw Error(ErrorCode::not_found, "theme '" + theme_name + "'");

    std::map<std::string, Timestamp> linked;
    std::set<std::string> resolved;
    for (const auto& e : edges_) {
        if (e.type == EdgeType::resolved_by) {
            resolved.insert(e.from);
            continue;
        }
        if (e.type != EdgeType::recurs_as && e.type != EdgeType::involves) continue;
        const std::string* other = nullptr;
        if (e.from == theme->id) other = &e.to;
        if (e.to == theme->id) other = &e.from;
        if (!other || nodes_.at(*other).kind != NodeKind::event) continue;
        auto [it, inserted] = linked.emplace(*other, e.timestamp);
        if (!inserted) it->second = std::min(it->second, e.timestamp);
    }

    std::vector<ThemeEvent> out;
    for (const auto& [id, at] : linked) out.push_back({nodes_.at(id), at, resolved.count(id) > 0});
    std::sort(out.begin(), out.end(), [](const ThemeEvent& a, const ThemeEvent& b) {
        return std::tie(a.event.created_at, a.linked_at, a.event.id) < std::tie(b.event.created_at, b.linked_at, b.event.id);
    });
    return out;
}

std::vector<std::string> GraphStore::render_facts(const std::string& user_id) const {
    std::vector<const GraphEdge*> owned;
    for (const auto& e : edges_) {
        if (nodes_.at(e.from).user_id == user_id) owned.push_back(&e);
    }
    std::stable_sort(owned.begin(), owned.end(), [](const GraphEdge* a, const GraphEdge* b) {
        return std::tie(a->timestamp, a->from, a->to) < std::tie(b->timestamp, b->from, b->to);
    });
    std::vector<std::string> out;
    out.reserve(owned.size());
    for (const GraphEdge* e : owned) {
        const auto& from = nodes_.at(e->from);
        const auto& to = nodes_.at(e->to);
        out.push_back(std::string(to_string(from.kind)) + " '" + from.name + "' " + std::string(to_string(e->type)) + " " +
                      std::string(to_string(to.kind)) + " '" + to.name + "'");
    }
    return out;
}

json GraphStore::to_json() const {
    json nodes = json::array();
    for (const auto& [_, n] : nodes_) nodes.push_back(n);
    return json{{"nodes", std::move(nodes)}, {"edges", edges_}};
}

GraphStore GraphStore::from_json(const json& j) {
    GraphStore g;
    for (const auto& n : j.at("nodes")) g.restore_node(n.get<GraphNode>());
    for (const auto& e : j.at("edges")) g.edges_.push_back(e.get<GraphEdge>());
    return g;
}

}  // namespace affmem
