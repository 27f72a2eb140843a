#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chorovessel/raster.hpp"

namespace chorovessel {

/// One-pixel-wide medial axis of a mask plus the distance map it was cut from.
/// dt[i] is the Euclidean distance from pixel i's center to the nearest
/// background pixel center; it is 0 on background. The image exterior counts as
/// background.
struct Skeleton {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;
    std::vector<double> dt;

    std::size_t count() const;
};

struct Pixel {
    int x = 0;
    int y = 0;
    bool operator==(const Pixel&) const = default;
};

enum class NodeKind { Endpoint, Junction };

struct GraphNode {
    int id = 0;
    int x = 0;
    int y = 0;
    int degree = 0;
    NodeKind kind = NodeKind::Endpoint;
};

/// node_a is the end nearer the component root; the polyline runs node_a -> node_b.
struct GraphEdge {
    int id = 0;
    int node_a = 0;
    int node_b = 0;
    std::vector<Pixel> polyline;
    std::vector<double> calibers;  // 2 * dt at each polyline point
    int strahler = 1;
    int level = 0;
    int component = 0;

    double mean_caliber() const;
    double pixel_length() const;  // sum of polyline step lengths
};

struct GraphComponent {
    int id = 0;
    int root_node = 0;
};

struct VesselGraph {
    int width = 0;
    int height = 0;
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    std::vector<GraphComponent> components;

    /// Edge ids incident to each node, indexed by node id.
    std::vector<std::vector<int>> incidence() const;
    /// Child edges of an edge (edges leaving its node_b away from the root).
    std::vector<int> children(int edge_id) const;
    /// Edge whose node_b is this node, or -1 for roots and isolated nodes.
    int parent_edge(int node_id) const;
    bool is_terminal(int edge_id) const;  // node_b is a degree-1 node
};

struct GraphOptions {
    /// Leaf edges reaching less than this far past the hub vessel's wall AND
    /// shorter than the fattest sibling edge's mean caliber are thinning
    /// artifacts and get removed.
    double spur_length = 3.0;
};

/// Exact Euclidean distance to background, in the Skeleton::dt convention.
std::vector<double> distance_to_background(const Mask& mask);

Skeleton skeletonize(const Mask& mask);

VesselGraph build_graph(const Skeleton& sk, const GraphOptions& options = {});

/// Calibers with `trim` points dropped at each end; the untrimmed list when the
/// polyline is too short to trim.
std::vector<double> segment_calibers(const GraphEdge& edge, int trim = 2);

/// "vgraph/1" JSON document.
std::string graph_to_json(const VesselGraph& graph);
VesselGraph graph_from_json(const std::string& text);

/// Graph skeleton pixels rasterized back onto the canvas.
Mask graph_skeleton_mask(const VesselGraph& graph);

}  // namespace chorovessel
