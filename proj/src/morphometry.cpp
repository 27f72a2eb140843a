#include "chorovessel/morphometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "chorovessel/error.hpp"

namespace chorovessel {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double dist(PointF a, PointF b) { return std::hypot(b.x - a.x, b.y - a.y); }

double angle_deg(PointF a, PointF b) {
    return std::abs(std::atan2(a.x * b.y - a.y * b.x, a.x * b.x + a.y * b.y)) * kRadToDeg;
}

// Point at arc position s along a polyline whose vertices sit at arc positions pos[].
PointF point_at(const std::vector<PointF>& pts, const std::vector<double>& pos, double s) {
    if (s <= pos.front()) return pts.front();
    if (s >= pos.back()) return pts.back();
    const auto it = std::upper_bound(pos.begin(), pos.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - pos.begin());
    const double span = pos[k] - pos[k - 1];
    const double f = span > 0 ? (s - pos[k - 1]) / span : 0.0;
    return {pts[k - 1].x + f * (pts[k].x - pts[k - 1].x), pts[k - 1].y + f * (pts[k].y - pts[k - 1].y)};
}

// Branch direction leaving polyline[0]: principal axis of n resampled points
// starting `skip` pixels out, oriented away from the node.
PointF leaving_direction(const std::vector<Pixel>& poly, double skip, const MorphometryOptions& opt) {
    const auto raw = to_points(poly);
    std::vector<double> pos(raw.size(), 0.0);
    for (std::size_t i = 1; i < raw.size(); ++i)
        pos[i] = pos[i - 1] + std::hypot(raw[i].x - raw[i - 1].x, raw[i].y - raw[i - 1].y);
    if (raw.empty()) return {0.0, 0.0};
    // fall back to the start when the branch is shorter than the junction blob
    const double s0 = skip < 0.5 * pos.back() ? skip : 0.0;
    std::vector<PointF> pts;
    for (int k = 0; k < std::max(2, opt.direction_points); ++k) {
        const double s = s0 + k * opt.resample_step;
        if (s > pos.back()) break;
        pts.push_back(point_at(raw, pos, s));
    }
    if (pts.size() < 2) pts.push_back(raw.back());
    const std::size_t n = pts.size();
    if (n < 2) return {0.0, 0.0};
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += pts[i].x, my += pts[i].y;
    mx /= double(n);
    my /= double(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = pts[i].x - mx, dy = pts[i].y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    PointF d{std::cos(theta), std::sin(theta)};
    const PointF out{pts[n - 1].x - pts[0].x, pts[n - 1].y - pts[0].y};
    if (d.x * out.x + d.y * out.y < 0) d = {-d.x, -d.y};
    return d;
}

const std::vector<std::string> kSegmentMetricNames = {
    "arc_length",  "chord_length",           "tortuosity",      "tortuosity_density",    "inflection_count",
    "inflection_tortuosity", "curve_angle",  "curve_angle_tortuosity", "angle_tortuosity", "fractal_tortuosity",
    "mean_caliber", "min_caliber",           "max_caliber",     "caliber_range",         "surface_area",
    "length_diameter_ratio", "strahler",     "level",           "terminal_caliber"};
const std::vector<std::string> kJunctionMetricNames = {"branching_angle", "angular_asymmetry", "asymmetry_ratio"};

Family family_of(const std::string& metric) {
    static const std::unordered_map<std::string, Family> table = {
        {"vessel_area_density", Family::Density},
        {"vessel_skeleton_density", Family::Density},
        {"branching_density", Family::Density},
        {"arc_length", Family::Density},
        {"chord_length", Family::Density},
        {"surface_area", Family::Density},
        {"fractal_dimension", Family::Complexity},
        {"n_terminal_points", Family::Complexity},
        {"n_components", Family::Complexity},
        {"strahler", Family::Complexity},
        {"level", Family::Complexity},
        {"tortuosity", Family::Tortuosity},
        {"tortuosity_density", Family::Tortuosity},
        {"inflection_count", Family::Tortuosity},
        {"inflection_tortuosity", Family::Tortuosity},
        {"curve_angle", Family::Tortuosity},
        {"curve_angle_tortuosity", Family::Tortuosity},
        {"angle_tortuosity", Family::Tortuosity},
        {"fractal_tortuosity", Family::Tortuosity},
        {"mean_caliber", Family::Caliber},
        {"min_caliber", Family::Caliber},
        {"max_caliber", Family::Caliber},
        {"caliber_range", Family::Caliber},
        {"length_diameter_ratio", Family::Caliber},
        {"terminal_caliber", Family::Caliber},
        {"branching_angle", Family::Branching},
        {"angular_asymmetry", Family::Branching},
        {"asymmetry_ratio", Family::Branching},
    };
    return table.at(metric);
}

const std::vector<std::string> kScalarNames = {"vessel_area_density", "vessel_skeleton_density", "branching_density",
                                               "fractal_dimension",   "n_terminal_points",       "n_components"};
const std::vector<std::string> kStats = {"mean", "sd", "max", "min"};

std::vector<Value> segment_values(const SegmentMetrics& m) {
    return {m.arc_length,
            m.chord_length,
            m.tortuosity,
            m.tortuosity_density,
            double(m.inflection_count),
            m.inflection_tortuosity,
            m.curve_angle,
            m.curve_angle_tortuosity,
            m.angle_tortuosity,
            m.fractal_tortuosity,
            m.mean_caliber,
            m.min_caliber,
            m.max_caliber,
            m.caliber_range,
            m.surface_area,
            m.length_diameter_ratio,
            double(m.strahler),
            double(m.level),
            m.terminal_caliber};
}

}  // namespace

std::vector<PointF> to_points(const std::vector<Pixel>& poly) {
    std::vector<PointF> out;
    out.reserve(poly.size());
    for (const auto& p : poly) out.push_back({double(p.x), double(p.y)});
    return out;
}

std::vector<PointF> smooth_polyline(const std::vector<PointF>& poly, int half_window) {
    const int n = static_cast<int>(poly.size());
    if (half_window <= 0 || n < 3) return poly;
    std::vector<PointF> out(poly.size());
    for (int i = 0; i < n; ++i) {
        // window shrinks symmetrically near the ends, so endpoints stay put
        const int k = std::min({half_window, i, n - 1 - i});
        double x = 0, y = 0;
        for (int j = i - k; j <= i + k; ++j) x += poly[j].x, y += poly[j].y;
        out[i] = {x / (2 * k + 1), y / (2 * k + 1)};
    }
    return out;
}

std::vector<PointF> resample_polyline(const std::vector<PointF>& poly, double step) {
    if (!(step > 0.0)) input_error("resample: step must be > 0");
    if (poly.size() < 2) return poly;
    std::vector<double> pos(poly.size(), 0.0);
    for (std::size_t i = 1; i < poly.size(); ++i) pos[i] = pos[i - 1] + dist(poly[i - 1], poly[i]);
    const double total = pos.back();
    if (total <= 0.0) return {poly.front()};
    // Whole number of equal pieces, as close to `step` as the length allows, so no
    // stub piece at the end injects a spurious turn.
    const auto pieces = static_cast<std::size_t>(std::max(1.0, std::round(total / step)));
    std::vector<PointF> out;
    out.reserve(pieces + 1);
    for (std::size_t k = 0; k <= pieces; ++k) out.push_back(point_at(poly, pos, total * double(k) / double(pieces)));
    return out;
}

SegmentMetrics segment_metrics(const VesselGraph& graph, const GraphEdge& edge, const MorphometryOptions& opt) {
    if (edge.polyline.empty()) input_error("segment_metrics: empty polyline");
    SegmentMetrics m;
    m.edge_id = edge.id;
    m.strahler = edge.strahler;
    m.level = edge.level;
    m.is_terminal = graph.is_terminal(edge.id);

    const auto pts = resample_polyline(smooth_polyline(to_points(edge.polyline), opt.smooth_half_window), opt.resample_step);
    std::vector<double> pos(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) pos[i] = pos[i - 1] + dist(pts[i - 1], pts[i]);
    m.arc_length = pos.back();
    m.chord_length = dist(pts.front(), pts.back());
    if (m.chord_length >= 1.0) m.tortuosity = std::max(1.0, m.arc_length / m.chord_length);

    // Turning at interior vertices of the resampled curve.
    std::vector<PointF> dirs;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double len = dist(pts[i - 1], pts[i]);
        dirs.push_back({(pts[i].x - pts[i - 1].x) / len, (pts[i].y - pts[i - 1].y) / len});
    }
    std::vector<double> splits;
    int last_sign = 0;
    std::size_t last_vertex = 0;
    for (std::size_t v = 1; v < dirs.size(); ++v) {
        const PointF a = dirs[v - 1], b = dirs[v];
        const double z = a.x * b.y - a.y * b.x;
        const double theta = std::atan2(z, a.x * b.x + a.y * b.y) * kRadToDeg;
        m.curve_angle += std::abs(theta);
        if (std::abs(z) <= opt.inflection_eps) continue;
        const int sign = z > 0 ? 1 : -1;
        if (last_sign != 0 && sign != last_sign) {
            ++m.inflection_count;
            splits.push_back(0.5 * (pos[last_vertex] + pos[v]));
        }
        last_sign = sign;
        last_vertex = v;
    }
    const std::size_t vertices = dirs.empty() ? 0 : dirs.size() - 1;
    if (vertices > 0) m.curve_angle_tortuosity = m.curve_angle / double(vertices);
    if (m.arc_length > 0.0) m.angle_tortuosity = m.curve_angle / m.arc_length;
    if (m.tortuosity) m.inflection_tortuosity = (m.inflection_count + 1) * *m.tortuosity;

    if (m.arc_length > 0.0) {
        std::vector<double> bounds{0.0};
        bounds.insert(bounds.end(), splits.begin(), splits.end());
        bounds.push_back(m.arc_length);
        const double n = double(bounds.size() - 1);
        double excess = 0.0;
        bool defined = true;
        for (std::size_t i = 1; i < bounds.size(); ++i) {
            const double chord = dist(point_at(pts, pos, bounds[i - 1]), point_at(pts, pos, bounds[i]));
            if (chord <= 1e-9) {
                defined = false;
                break;
            }
            excess += (bounds[i] - bounds[i - 1]) / chord - 1.0;
        }
        if (defined) m.tortuosity_density = std::max(0.0, ((n - 1.0) / n) * excess / m.arc_length);
    }

    // Box counting over the edge's own pixels, boxes anchored at its bounding box.
    {
        int x0 = edge.polyline[0].x, x1 = x0, y0 = edge.polyline[0].y, y1 = y0;
        for (const auto& p : edge.polyline) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
        Mask local(x1 - x0 + 1, y1 - y0 + 1);
        for (const auto& p : edge.polyline) local.at(p.x - x0, p.y - y0) = 1;
        std::vector<int> sizes;
        const int extent = std::max(local.width, local.height);
        for (int s = 1; s <= extent / 2; s *= 2) sizes.push_back(s);
        m.fractal_tortuosity = box_count_dimension(local, sizes);
    }

    const auto cal = segment_calibers(edge, opt.caliber_trim);
    if (!cal.empty()) {
        double sum = 0.0;
        m.min_caliber = cal.front();
        m.max_caliber = cal.front();
        for (double c : cal) {
            sum += c;
            m.min_caliber = std::min(m.min_caliber, c);
            m.max_caliber = std::max(m.max_caliber, c);
        }
        m.mean_caliber = sum / double(cal.size());
        m.caliber_range = m.max_caliber - m.min_caliber;
        if (m.is_terminal) {
            const std::size_t k = std::min<std::size_t>(cal.size(), static_cast<std::size_t>(std::max(1, opt.terminal_points)));
            double tip = 0.0;
            for (std::size_t i = cal.size() - k; i < cal.size(); ++i) tip += cal[i];
            m.terminal_caliber = tip / double(k);
        }
    }
    m.surface_area = m.arc_length * m.mean_caliber;
    if (m.mean_caliber > 0.0) m.length_diameter_ratio = m.arc_length / m.mean_caliber;
    return m;
}

std::vector<JunctionMetrics> branching_metrics(const VesselGraph& graph, const MorphometryOptions& opt) {
    std::vector<JunctionMetrics> out;
    std::vector<int> parent_of(graph.nodes.size(), -1);
    std::vector<std::vector<int>> children_of(graph.nodes.size());
    for (const auto& e : graph.edges) {
        parent_of[e.node_b] = e.id;
        children_of[e.node_a].push_back(e.id);
    }
    for (const auto& node : graph.nodes) {
        if (node.degree < 3) continue;
        JunctionMetrics j;
        j.node_id = node.id;
        auto kids = children_of[node.id];
        const int parent = parent_of[node.id];
        if (parent >= 0 && kids.size() >= 2) {
            std::stable_sort(kids.begin(), kids.end(), [&](int a, int b) {
                return graph.edges[a].mean_caliber() > graph.edges[b].mean_caliber();
            });
            auto back = graph.edges[parent].polyline;
            std::reverse(back.begin(), back.end());
            // the skeleton node sits inside a junction blob; start measuring at its wall
            const auto& pc = graph.edges[parent].calibers;
            const double skip = pc.empty() ? 0.0 : opt.junction_skip * 0.5 * pc.back();
            const PointF out_dir = leaving_direction(back, skip, opt);
            const PointF inflow{-out_dir.x, -out_dir.y};
            const PointF c1 = leaving_direction(graph.edges[kids[0]].polyline, skip, opt);
            const PointF c2 = leaving_direction(graph.edges[kids[1]].polyline, skip, opt);
            const double a1 = angle_deg(inflow, c1), a2 = angle_deg(inflow, c2);
            j.branching_angle = angle_deg(c1, c2);
            j.angular_asymmetry = std::abs(a1 - a2);
            if (std::max(a1, a2) > 0.0) j.asymmetry_ratio = std::min(a1, a2) / std::max(a1, a2);
        }
        out.push_back(j);
    }
    return out;
}

Value box_count_dimension(const Mask& mask, const std::vector<int>& sizes) {
    std::vector<std::size_t> fg;
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        if (mask.bits[i]) fg.push_back(i);
    if (fg.empty()) return std::nullopt;
    std::vector<double> xs, ys;
    for (int s : sizes) {
        if (s < 1) input_error("box counting: sizes must be >= 1");
        const int cols = (mask.width + s - 1) / s;
        const int rows = (mask.height + s - 1) / s;
        std::vector<std::uint8_t> hit(static_cast<std::size_t>(cols) * rows, 0);
        std::size_t n = 0;
        for (std::size_t i : fg) {
            const int x = int(i % mask.width), y = int(i / mask.width);
            auto& h = hit[static_cast<std::size_t>(y / s) * cols + x / s];
            if (!h) h = 1, ++n;
        }
        xs.push_back(std::log(1.0 / s));
        ys.push_back(std::log(double(n)));
    }
    if (xs.size() < 2) return std::nullopt;
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return std::clamp(sxy / sxx, 1.0, 2.0);
}

std::vector<int> image_box_sizes(int width, int height) {
    std::vector<int> sizes;
    for (int s = 2; s <= std::min(width, height) / 4; s *= 2) sizes.push_back(s);
    return sizes;
}

std::string_view family_name(Family f) {
    switch (f) {
        case Family::Density: return "density";
        case Family::Complexity: return "complexity";
        case Family::Tortuosity: return "tortuosity";
        case Family::Caliber: return "caliber";
        case Family::Branching: return "branching";
    }
    return "unknown";
}

const std::vector<std::string>& consolidated_metric_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n = kSegmentMetricNames;
        n.insert(n.end(), kJunctionMetricNames.begin(), kJunctionMetricNames.end());
        return n;
    }();
    return names;
}

const std::vector<CatalogEntry>& metrics_catalog() {
    static const std::vector<CatalogEntry> catalog = [] {
        std::vector<CatalogEntry> c;
        for (const auto& s : kScalarNames) c.push_back({s, family_of(s)});
        for (const auto& m : consolidated_metric_names())
            for (const auto& st : kStats) c.push_back({m + "_" + st, family_of(m)});
        return c;
    }();
    return catalog;
}

Value ImageMetricsRow::get(std::string_view name) const {
    const auto& cat = metrics_catalog();
    for (std::size_t i = 0; i < cat.size(); ++i)
        if (cat[i].name == name) return i < values.size() ? values[i] : std::nullopt;
    input_error("unknown metric '" + std::string(name) + "'");
}

Summary consolidate(const std::vector<Value>& values) {
    std::vector<double> v;
    for (const auto& x : values)
        if (x) v.push_back(*x);
    Summary s;
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / double(v.size());
    s.mean = mean;
    s.max = *std::max_element(v.begin(), v.end());
    s.min = *std::min_element(v.begin(), v.end());
    if (v.size() >= 2) {
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        s.sd = std::sqrt(ss / double(v.size() - 1));
    }
    return s;
}

ImageMetricsRow image_metrics(const std::string& image_id, const Mask& mask, const VesselGraph& graph,
                              const MorphometryOptions& opt) {
    if (mask.width != graph.width || mask.height != graph.height)
        input_error("image_metrics: mask and graph dimensions differ");
    ImageMetricsRow row;
    row.image_id = image_id;
    const double total = double(mask.width) * double(mask.height);
    const Mask skeleton = graph_skeleton_mask(graph);
    int junctions = 0, terminals = 0;
    for (const auto& n : graph.nodes) {
        junctions += n.degree >= 3;
        terminals += n.degree == 1;
    }
    row.values.push_back(double(mask.count()) / total);
    row.values.push_back(double(skeleton.count()) / total);
    row.values.push_back(1e6 * junctions / total);
    row.values.push_back(box_count_dimension(skeleton, image_box_sizes(mask.width, mask.height)));
    row.values.push_back(double(terminals));
    row.values.push_back(double(graph.components.size()));

    std::vector<std::vector<Value>> columns(consolidated_metric_names().size());
    for (const auto& e : graph.edges) {
        const auto vals = segment_values(segment_metrics(graph, e, opt));
        for (std::size_t k = 0; k < vals.size(); ++k) columns[k].push_back(vals[k]);
    }
    const std::size_t base = kSegmentMetricNames.size();
    for (const auto& j : branching_metrics(graph, opt)) {
        columns[base + 0].push_back(j.branching_angle);
        columns[base + 1].push_back(j.angular_asymmetry);
        columns[base + 2].push_back(j.asymmetry_ratio);
    }
    for (const auto& col : columns) {
        const Summary s = consolidate(col);
        row.values.push_back(s.mean);
        row.values.push_back(s.sd);
        row.values.push_back(s.max);
        row.values.push_back(s.min);
    }
    return row;
}

std::string metrics_csv(const std::vector<ImageMetricsRow>& rows) {
    std::string out = "image_id";
    for (const auto& e : metrics_catalog()) out += "," + e.name;
    out += "\n";
    char buf[64];
    for (const auto& r : rows) {
        if (r.image_id.find_first_of(",\"\n\r") != std::string::npos)
            input_error("metrics csv: image id '" + r.image_id + "' needs quoting");
        out += r.image_id;
        for (const auto& v : r.values) {
            out += ",";
            if (v) {
                std::snprintf(buf, sizeof buf, "%.10g", *v);
                out += buf;
            }
        }
        out += "\n";
    }
    return out;
}

}  // namespace chorovessel
