#include "chorovessel/vesselgraph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>

#include "chorovessel/error.hpp"

namespace chorovessel {

namespace {

constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (b < a) std::swap(a, b);
        parent[b] = a;
        return true;
    }
};

// Working representation while the graph is edited; ids are compacted at the end.
struct RawEdge {
    int a = -1;
    int b = -1;
    std::vector<Pixel> poly;
    std::vector<double> cal;
    bool alive = true;

    double mean_caliber() const {
        if (cal.empty()) return 0.0;
        return std::accumulate(cal.begin(), cal.end(), 0.0) / static_cast<double>(cal.size());
    }
    double length() const {
        double s = 0.0;
        for (std::size_t i = 1; i < poly.size(); ++i)
            s += std::hypot(poly[i].x - poly[i - 1].x, poly[i].y - poly[i - 1].y);
        return s;
    }
};

struct RawNode {
    Pixel pos;
    bool alive = true;
};

struct RawGraph {
    std::vector<RawNode> nodes;
    std::vector<RawEdge> edges;

    std::vector<std::vector<int>> incidence() const {
        std::vector<std::vector<int>> inc(nodes.size());
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (!edges[e].alive) continue;
            inc[edges[e].a].push_back(static_cast<int>(e));
            if (edges[e].b != edges[e].a) inc[edges[e].b].push_back(static_cast<int>(e));
            else inc[edges[e].a].push_back(static_cast<int>(e));
        }
        return inc;
    }
};

void reverse_edge(RawEdge& e) {
    std::swap(e.a, e.b);
    std::reverse(e.poly.begin(), e.poly.end());
    std::reverse(e.cal.begin(), e.cal.end());
}

RawGraph trace(const Skeleton& sk) {
    const int w = sk.width;
    const int h = sk.height;
    auto on = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && sk.bits[static_cast<std::size_t>(y) * w + x]; };
    auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
    auto degree = [&](int x, int y) {
        int n = 0;
        for (int k = 0; k < 8; ++k) n += on(x + kDx[k], y + kDy[k]);
        return n;
    };

    RawGraph g;
    std::vector<int> node_of(sk.bits.size(), -1);

    // Junction pixels that touch are one junction; every other non-path pixel is its own node.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!on(x, y) || node_of[idx(x, y)] >= 0) continue;
            const int d = degree(x, y);
            if (d == 2) continue;
            const int id = static_cast<int>(g.nodes.size());
            std::vector<Pixel> cluster{{x, y}};
            node_of[idx(x, y)] = id;
            if (d >= 3) {
                for (std::size_t q = 0; q < cluster.size(); ++q) {
                    for (int k = 0; k < 8; ++k) {
                        const int nx = cluster[q].x + kDx[k];
                        const int ny = cluster[q].y + kDy[k];
                        if (on(nx, ny) && node_of[idx(nx, ny)] < 0 && degree(nx, ny) >= 3) {
                            node_of[idx(nx, ny)] = id;
                            cluster.push_back({nx, ny});
                        }
                    }
                }
            }
            double cx = 0, cy = 0;
            for (const auto& p : cluster) {
                cx += p.x;
                cy += p.y;
            }
            cx /= static_cast<double>(cluster.size());
            cy /= static_cast<double>(cluster.size());
            Pixel best = cluster.front();
            double best_d = std::numeric_limits<double>::infinity();
            for (const auto& p : cluster) {
                const double dd = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
                if (dd < best_d || (dd == best_d && (p.y < best.y || (p.y == best.y && p.x < best.x)))) {
                    best_d = dd;
                    best = p;
                }
            }
            g.nodes.push_back({best, true});
        }
    }

    std::vector<std::uint8_t> visited(sk.bits.size(), 0);
    auto caliber_at = [&](const Pixel& p) { return 2.0 * sk.dt[idx(p.x, p.y)]; };
    auto finish = [&](RawEdge& e) {
        for (const auto& p : e.poly) e.cal.push_back(caliber_at(p));
        g.edges.push_back(std::move(e));
    };

    // Walk from every node pixel into each unvisited neighbor.
    std::map<std::pair<int, int>, bool> direct_links;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int start = on(x, y) ? node_of[idx(x, y)] : -1;
            if (start < 0) continue;
            for (int k = 0; k < 8; ++k) {
                const int nx = x + kDx[k];
                const int ny = y + kDy[k];
                if (!on(nx, ny)) continue;
                const int other = node_of[idx(nx, ny)];
                if (other == start) continue;
                RawEdge e;
                e.a = start;
                e.poly.push_back(g.nodes[start].pos);
                if (!(g.nodes[start].pos == Pixel{x, y})) e.poly.push_back({x, y});
                if (other >= 0) {
                    // Two nodes touching directly; one edge per node pair.
                    const auto key = std::minmax(start, other);
                    if (direct_links.count(key)) continue;
                    direct_links[key] = true;
                    e.b = other;
                    e.poly.push_back({nx, ny});
                    if (!(g.nodes[other].pos == Pixel{nx, ny})) e.poly.push_back(g.nodes[other].pos);
                    finish(e);
                    continue;
                }
                if (visited[idx(nx, ny)]) continue;
                int px = x, py = y, cx = nx, cy = ny;
                while (true) {
                    visited[idx(cx, cy)] = 1;
                    e.poly.push_back({cx, cy});
                    int next_x = -1, next_y = -1, end_node = -1;
                    for (int j = 0; j < 8; ++j) {
                        const int qx = cx + kDx[j];
                        const int qy = cy + kDy[j];
                        if (!on(qx, qy) || (qx == px && qy == py)) continue;
                        const int qn = node_of[idx(qx, qy)];
                        if (qn >= 0) {
                            end_node = qn;
                            next_x = qx;
                            next_y = qy;
                            break;
                        }
                        if (!visited[idx(qx, qy)]) {
                            next_x = qx;
                            next_y = qy;
                        }
                    }
                    if (end_node >= 0) {
                        e.b = end_node;
                        e.poly.push_back({next_x, next_y});
                        if (!(g.nodes[end_node].pos == Pixel{next_x, next_y})) e.poly.push_back(g.nodes[end_node].pos);
                        break;
                    }
                    if (next_x < 0) {
                        // Dead end on a path pixel (should not happen on a thin skeleton): close here.
                        const int id = static_cast<int>(g.nodes.size());
                        g.nodes.push_back({{cx, cy}, true});
                        node_of[idx(cx, cy)] = id;
                        e.b = id;
                        break;
                    }
                    px = cx;
                    py = cy;
                    cx = next_x;
                    cy = next_y;
                }
                // Drop consecutive duplicates from node-position joins.
                e.poly.erase(std::unique(e.poly.begin(), e.poly.end()), e.poly.end());
                finish(e);
            }
        }
    }

    // Closed loops with no node pixel: pin one synthetic node and trace around.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!on(x, y) || visited[idx(x, y)] || node_of[idx(x, y)] >= 0) continue;
            const int id = static_cast<int>(g.nodes.size());
            g.nodes.push_back({{x, y}, true});
            node_of[idx(x, y)] = id;
            RawEdge e;
            e.a = id;
            e.b = id;
            e.poly.push_back({x, y});
            int px = x, py = y, cx = -1, cy = -1;
            for (int k = 0; k < 8 && cx < 0; ++k)
                if (on(x + kDx[k], y + kDy[k])) {
                    cx = x + kDx[k];
                    cy = y + kDy[k];
                }
            while (cx >= 0 && !(cx == x && cy == y)) {
                visited[idx(cx, cy)] = 1;
                e.poly.push_back({cx, cy});
                int nx = -1, ny = -1;
                for (int k = 0; k < 8; ++k) {
                    const int qx = cx + kDx[k];
                    const int qy = cy + kDy[k];
                    if (!on(qx, qy) || (qx == px && qy == py)) continue;
                    if ((qx == x && qy == y) || !visited[idx(qx, qy)]) {
                        nx = qx;
                        ny = qy;
                        if (qx == x && qy == y) break;
                    }
                }
                px = cx;
                py = cy;
                cx = nx;
                cy = ny;
            }
            e.poly.push_back({x, y});
            finish(e);
        }
    }
    return g;
}

void prune_spurs(RawGraph& g, double spur_length) {
    const auto inc = g.incidence();
    std::vector<int> doomed;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const RawEdge& edge = g.edges[e];
        if (!edge.alive || edge.a == edge.b) continue;
        const int da = static_cast<int>(inc[edge.a].size());
        const int db = static_cast<int>(inc[edge.b].size());
        int leaf = -1, hub = -1;
        if (da == 1 && db >= 3) {
            leaf = edge.a;
            hub = edge.b;
        } else if (db == 1 && da >= 3) {
            leaf = edge.b;
            hub = edge.a;
        }
        if (leaf < 0) continue;
        double parent_caliber = 0.0;
        for (int other : inc[hub])
            if (other != static_cast<int>(e)) parent_caliber = std::max(parent_caliber, g.edges[other].mean_caliber());
        // Length is counted from the hub vessel's wall, not its centerline, so a
        // thinning fork inside a thick vessel is not mistaken for a branch.
        const double len = edge.length();
        const double hub_radius = 0.5 * (leaf == edge.b ? edge.cal.front() : edge.cal.back());
        if (len - hub_radius < spur_length && len < parent_caliber) doomed.push_back(static_cast<int>(e));
    }
    // A star whose arms are all short would vanish; keep its two longest arms.
    std::map<int, std::vector<int>> by_hub;
    for (int e : doomed) {
        const RawEdge& edge = g.edges[e];
        by_hub[inc[edge.a].size() == 1 ? edge.b : edge.a].push_back(e);
    }
    doomed.clear();
    for (auto& [hub, arms] : by_hub) {
        const std::size_t survivors = inc[hub].size() - arms.size();
        if (survivors < 2) {
            std::stable_sort(arms.begin(), arms.end(),
                             [&](int l, int r) { return g.edges[l].length() > g.edges[r].length(); });
            arms.erase(arms.begin(), arms.begin() + static_cast<std::ptrdiff_t>(std::min(arms.size(), 2 - survivors)));
        }
        doomed.insert(doomed.end(), arms.begin(), arms.end());
    }
    for (int e : doomed) g.edges[e].alive = false;
    const auto inc_now = g.incidence();
    for (int e : doomed)
        for (int n : {g.edges[e].a, g.edges[e].b})
            if (inc_now[n].empty()) g.nodes[n].alive = false;
}

void break_cycles(RawGraph& g) {
    std::vector<int> order;
    for (std::size_t e = 0; e < g.edges.size(); ++e)
        if (g.edges[e].alive) order.push_back(static_cast<int>(e));
    std::stable_sort(order.begin(), order.end(),
                     [&](int l, int r) { return g.edges[l].mean_caliber() > g.edges[r].mean_caliber(); });
    // Maximum spanning forest on mean caliber: every rejected edge is the
    // thinnest edge of the cycle it would close.
    DisjointSet ds(g.nodes.size());
    for (int e : order)
        if (!ds.unite(g.edges[e].a, g.edges[e].b)) g.edges[e].alive = false;
}

void merge_pass_through(RawGraph& g) {
    bool merged = true;
    while (merged) {
        merged = false;
        const auto inc = g.incidence();
        for (std::size_t n = 0; n < g.nodes.size() && !merged; ++n) {
            if (!g.nodes[n].alive || inc[n].size() != 2 || inc[n][0] == inc[n][1]) continue;
            RawEdge& e1 = g.edges[inc[n][0]];
            RawEdge& e2 = g.edges[inc[n][1]];
            if (e1.b != static_cast<int>(n)) reverse_edge(e1);
            if (e2.a != static_cast<int>(n)) reverse_edge(e2);
            if (e1.a == static_cast<int>(n) || e2.b == static_cast<int>(n)) continue;
            e1.poly.insert(e1.poly.end(), e2.poly.begin() + 1, e2.poly.end());
            e1.cal.insert(e1.cal.end(), e2.cal.begin() + 1, e2.cal.end());
            e1.b = e2.b;
            e2.alive = false;
            g.nodes[n].alive = false;
            merged = true;
        }
    }
}

}  // namespace

double GraphEdge::mean_caliber() const {
    if (calibers.empty()) return 0.0;
    return std::accumulate(calibers.begin(), calibers.end(), 0.0) / static_cast<double>(calibers.size());
}

double GraphEdge::pixel_length() const {
    double s = 0.0;
    for (std::size_t i = 1; i < polyline.size(); ++i)
        s += std::hypot(polyline[i].x - polyline[i - 1].x, polyline[i].y - polyline[i - 1].y);
    return s;
}

std::vector<std::vector<int>> VesselGraph::incidence() const {
    std::vector<std::vector<int>> inc(nodes.size());
    for (const auto& e : edges) {
        inc[e.node_a].push_back(e.id);
        inc[e.node_b].push_back(e.id);
    }
    return inc;
}

std::vector<int> VesselGraph::children(int edge_id) const {
    std::vector<int> out;
    const int hub = edges[edge_id].node_b;
    for (const auto& e : edges)
        if (e.node_a == hub && e.id != edge_id) out.push_back(e.id);
    return out;
}

int VesselGraph::parent_edge(int node_id) const {
    for (const auto& e : edges)
        if (e.node_b == node_id) return e.id;
    return -1;
}

bool VesselGraph::is_terminal(int edge_id) const { return nodes[edges[edge_id].node_b].degree == 1; }

VesselGraph build_graph(const Skeleton& sk, const GraphOptions& options) {
    if (sk.bits.size() != static_cast<std::size_t>(sk.width) * sk.height || sk.dt.size() != sk.bits.size())
        input_error("build_graph: inconsistent skeleton buffers");

    RawGraph g = trace(sk);
    prune_spurs(g, options.spur_length);
    break_cycles(g);
    merge_pass_through(g);

    VesselGraph out;
    out.width = sk.width;
    out.height = sk.height;

    std::vector<int> new_id(g.nodes.size(), -1);
    for (std::size_t n = 0; n < g.nodes.size(); ++n) {
        if (!g.nodes[n].alive) continue;
        new_id[n] = static_cast<int>(out.nodes.size());
        GraphNode node;
        node.id = new_id[n];
        node.x = g.nodes[n].pos.x;
        node.y = g.nodes[n].pos.y;
        out.nodes.push_back(node);
    }
    std::vector<RawEdge> edges;
    for (auto& e : g.edges)
        if (e.alive) edges.push_back(std::move(e));
    for (auto& e : edges) {
        e.a = new_id[e.a];
        e.b = new_id[e.b];
    }

    const std::size_t nn = out.nodes.size();
    std::vector<std::vector<int>> inc(nn);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        inc[edges[e].a].push_back(static_cast<int>(e));
        inc[edges[e].b].push_back(static_cast<int>(e));
    }
    for (std::size_t n = 0; n < nn; ++n) {
        out.nodes[n].degree = static_cast<int>(inc[n].size());
        out.nodes[n].kind = out.nodes[n].degree >= 3 ? NodeKind::Junction : NodeKind::Endpoint;
    }

    // Components, each rooted at the free end of its fattest leaf edge.
    DisjointSet ds(nn);
    for (const auto& e : edges) ds.unite(e.a, e.b);
    std::vector<int> comp_of(nn, -1);
    std::vector<int> edge_comp(edges.size(), -1);
    for (std::size_t n = 0; n < nn; ++n) {
        const int r = ds.find(static_cast<int>(n));
        if (comp_of[r] < 0) {
            comp_of[r] = static_cast<int>(out.components.size());
            out.components.push_back({comp_of[r], static_cast<int>(n)});
        }
        comp_of[n] = comp_of[r];
    }
    std::vector<double> best_leaf(out.components.size(), -1.0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const int c = comp_of[edges[e].a];
        edge_comp[e] = c;
        for (int end : {edges[e].a, edges[e].b}) {
            if (out.nodes[end].degree != 1) continue;
            const double mc = edges[e].mean_caliber();
            if (mc > best_leaf[c]) {
                best_leaf[c] = mc;
                out.components[c].root_node = end;
            }
        }
    }

    // Orient edges away from the root and assign levels breadth-first.
    std::vector<int> level(edges.size(), -1);
    std::vector<int> bfs_order;
    for (const auto& comp : out.components) {
        std::queue<int> q;
        q.push(comp.root_node);
        std::vector<std::uint8_t> seen_node(nn, 0);
        seen_node[comp.root_node] = 1;
        std::vector<int> depth_of_node(nn, 0);
        while (!q.empty()) {
            const int n = q.front();
            q.pop();
            for (int e : inc[n]) {
                if (level[e] >= 0) continue;
                if (edges[e].a != n) reverse_edge(edges[e]);
                level[e] = depth_of_node[n];
                bfs_order.push_back(e);
                const int child = edges[e].b;
                if (!seen_node[child]) {
                    seen_node[child] = 1;
                    depth_of_node[child] = level[e] + 1;
                    q.push(child);
                }
            }
        }
    }

    // Strahler from the leaves up (reverse breadth-first order).
    std::vector<int> strahler(edges.size(), 1);
    for (auto it = bfs_order.rbegin(); it != bfs_order.rend(); ++it) {
        const int e = *it;
        int top = 0, count_top = 0;
        for (int c : inc[edges[e].b]) {
            if (c == e) continue;
            if (strahler[c] > top) {
                top = strahler[c];
                count_top = 1;
            } else if (strahler[c] == top) {
                ++count_top;
            }
        }
        strahler[e] = top == 0 ? 1 : (count_top >= 2 ? top + 1 : top);
    }

    for (std::size_t e = 0; e < edges.size(); ++e) {
        GraphEdge ge;
        ge.id = static_cast<int>(e);
        ge.node_a = edges[e].a;
        ge.node_b = edges[e].b;
        ge.polyline = std::move(edges[e].poly);
        ge.calibers = std::move(edges[e].cal);
        ge.strahler = strahler[e];
        ge.level = std::max(0, level[e]);
        ge.component = edge_comp[e];
        out.edges.push_back(std::move(ge));
    }
    return out;
}

std::vector<double> segment_calibers(const GraphEdge& edge, int trim) {
    const auto n = static_cast<long>(edge.calibers.size());
    if (trim <= 0 || n <= 2L * trim) return edge.calibers;
    return {edge.calibers.begin() + trim, edge.calibers.end() - trim};
}

Mask graph_skeleton_mask(const VesselGraph& graph) {
    Mask m(graph.width, graph.height);
    for (const auto& n : graph.nodes) m.at(n.x, n.y) = 1;
    for (const auto& e : graph.edges)
        for (const auto& p : e.polyline) m.at(p.x, p.y) = 1;
    return m;
}

}  // namespace chorovessel
