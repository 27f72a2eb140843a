#include <json.hpp>

#include "chorovessel/error.hpp"
#include "chorovessel/vesselgraph.hpp"

namespace chorovessel {

using nlohmann::json;

std::string graph_to_json(const VesselGraph& graph) {
    json doc;
    doc["schema"] = "vgraph/1";
    doc["width"] = graph.width;
    doc["height"] = graph.height;
    json nodes = json::array();
    for (const auto& n : graph.nodes)
        nodes.push_back({{"id", n.id},
                         {"x", n.x},
                         {"y", n.y},
                         {"degree", n.degree},
                         {"kind", n.kind == NodeKind::Junction ? "junction" : "endpoint"}});
    doc["nodes"] = std::move(nodes);
    json edges = json::array();
    for (const auto& e : graph.edges) {
        json poly = json::array();
        for (const auto& p : e.polyline) poly.push_back({p.x, p.y});
        edges.push_back({{"id", e.id},
                         {"node_a", e.node_a},
                         {"node_b", e.node_b},
                         {"polyline", std::move(poly)},
                         {"calibers", e.calibers},
                         {"strahler", e.strahler},
                         {"level", e.level},
                         {"component", e.component}});
    }
    doc["edges"] = std::move(edges);
    json comps = json::array();
    for (const auto& c : graph.components) comps.push_back({{"id", c.id}, {"root_node", c.root_node}});
    doc["components"] = std::move(comps);
    return doc.dump(1);
}

VesselGraph graph_from_json(const std::string& text) {
    VesselGraph g;
    try {
        const json doc = json::parse(text);
        if (doc.at("schema") != "vgraph/1") input_error("graph json: unsupported schema");
        g.width = doc.at("width").get<int>();
        g.height = doc.at("height").get<int>();
        for (const auto& n : doc.at("nodes")) {
            GraphNode node;
            node.id = n.at("id").get<int>();
            node.x = n.at("x").get<int>();
            node.y = n.at("y").get<int>();
            node.degree = n.at("degree").get<int>();
            node.kind = n.at("kind") == "junction" ? NodeKind::Junction : NodeKind::Endpoint;
            g.nodes.push_back(node);
        }
        for (const auto& e : doc.at("edges")) {
            GraphEdge edge;
            edge.id = e.at("id").get<int>();
            edge.node_a = e.at("node_a").get<int>();
            edge.node_b = e.at("node_b").get<int>();
            for (const auto& p : e.at("polyline")) edge.polyline.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
            edge.calibers = e.at("calibers").get<std::vector<double>>();
            edge.strahler = e.at("strahler").get<int>();
            edge.level = e.at("level").get<int>();
            edge.component = e.at("component").get<int>();
            g.edges.push_back(std::move(edge));
        }
        for (const auto& c : doc.at("components"))
            g.components.push_back({c.at("id").get<int>(), c.at("root_node").get<int>()});
    } catch (const json::exception& e) {
        input_error(std::string("graph json: ") + e.what());
    }
    return g;
}

}  // namespace chorovessel
