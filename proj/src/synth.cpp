#include "chorovessel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>
#include <random>

#include "chorovessel/error.hpp"

namespace chorovessel {

namespace {

using nlohmann::json;
constexpr double kPi = std::numbers::pi;
constexpr double kSampleStep = 0.25;  // analytic-curve sampling, pixels of base length

struct Curve {
    PointF start;
    double heading = 0.0;  // radians
    double length = 0.0;
    double amplitude = 0.0;
    double period = 1.0;

    PointF at(double t) const {
        const double ux = std::cos(heading), uy = std::sin(heading);
        const double off = amplitude * std::sin(2.0 * kPi * t / period);
        return {start.x + t * ux - off * uy, start.y + t * uy + off * ux};
    }
    PointF tangent(double t) const {
        const double ux = std::cos(heading), uy = std::sin(heading);
        const double d = amplitude * 2.0 * kPi / period * std::cos(2.0 * kPi * t / period);
        return {ux - d * uy, uy + d * ux};
    }
    double speed(double t) const {
        const PointF d = tangent(t);
        return std::hypot(d.x, d.y);
    }
};

// Composite 5-point Gauss-Legendre quadrature of the curve speed.
double arc_length(const Curve& c, double t1) {
    static const double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                    0.9061798459386640};
    static const double weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                      0.4786286704993665, 0.2369268850561891};
    if (t1 <= 0.0) return 0.0;
    const int pieces = std::max(8, static_cast<int>(std::ceil(t1 / 1.0)));
    const double h = t1 / pieces;
    double total = 0.0;
    for (int p = 0; p < pieces; ++p) {
        const double mid = (p + 0.5) * h;
        for (int k = 0; k < 5; ++k) total += weights[k] * c.speed(mid + 0.5 * h * nodes[k]);
    }
    return total * 0.5 * h;
}

std::vector<PointF> sample_curve(const Curve& c) {
    std::vector<PointF> pts;
    const int n = std::max(1, static_cast<int>(std::ceil(c.length / kSampleStep)));
    pts.reserve(n + 1);
    for (int i = 0; i <= n; ++i) pts.push_back(c.at(c.length * i / n));
    return pts;
}

double deg(double rad) { return rad * 180.0 / kPi; }
double rad(double d) { return d * kPi / 180.0; }

double angle_between(PointF a, PointF b) {
    const double dot = a.x * b.x + a.y * b.y;
    const double cross = a.x * b.y - a.y * b.x;
    return deg(std::abs(std::atan2(cross, dot)));
}

// Point at arc distance s along a dense polyline, walking from its front (or back).
PointF point_at_arc(const std::vector<PointF>& pts, double s, bool from_back) {
    double acc = 0.0;
    const std::size_t n = pts.size();
    for (std::size_t k = 1; k < n; ++k) {
        const PointF& a = from_back ? pts[n - k] : pts[k - 1];
        const PointF& b = from_back ? pts[n - k - 1] : pts[k];
        const double step = std::hypot(b.x - a.x, b.y - a.y);
        if (acc + step >= s) {
            const double f = step > 0 ? (s - acc) / step : 0.0;
            return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
        }
        acc += step;
    }
    return from_back ? pts.front() : pts.back();
}

// Principal axis of samples at arcs s0, s0+step, ... measured from one end,
// oriented away from that end.
PointF branch_direction(const std::vector<PointF>& pts, double s0, double step, int n, bool from_back) {
    std::vector<PointF> w;
    for (int k = 0; k < n; ++k) w.push_back(point_at_arc(pts, s0 + k * step, from_back));
    double mx = 0, my = 0;
    for (const auto& p : w) mx += p.x, my += p.y;
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& p : w) {
        sxx += (p.x - mx) * (p.x - mx);
        syy += (p.y - my) * (p.y - my);
        sxy += (p.x - mx) * (p.y - my);
    }
    const double th = 0.5 * std::atan2(2 * sxy, sxx - syy);
    PointF d{std::cos(th), std::sin(th)};
    if (d.x * (w.back().x - w.front().x) + d.y * (w.back().y - w.front().y) < 0) d = {-d.x, -d.y};
    return d;
}

// Coarse bucket grid over committed curve samples for clearance queries.
class Occupancy {
public:
    Occupancy(int w, int h) : cols_(w / kCell + 1), rows_(h / kCell + 1), cells_(static_cast<std::size_t>(cols_) * rows_) {}

    void add(const std::vector<PointF>& pts, double half_width, int owner) {
        for (const auto& p : pts) {
            const int cx = std::clamp(static_cast<int>(p.x) / kCell, 0, cols_ - 1);
            const int cy = std::clamp(static_cast<int>(p.y) / kCell, 0, rows_ - 1);
            cells_[static_cast<std::size_t>(cy) * cols_ + cx].push_back({p, half_width, owner});
        }
    }

    /// True when p (a disk of radius half_width) keeps `gap` from every stored
    /// sample that lies outside the exclusion disk around `junction`.
    bool clear(PointF p, double half_width, double gap, PointF junction, double exclusion) const {
        const double reach = half_width + gap + max_half_width_;
        const int r = static_cast<int>(std::ceil(reach / kCell)) + 1;
        const int cx = static_cast<int>(p.x) / kCell, cy = static_cast<int>(p.y) / kCell;
        for (int y = std::max(0, cy - r); y <= std::min(rows_ - 1, cy + r); ++y)
            for (int x = std::max(0, cx - r); x <= std::min(cols_ - 1, cx + r); ++x)
                for (const auto& s : cells_[static_cast<std::size_t>(y) * cols_ + x]) {
                    if (std::hypot(s.p.x - junction.x, s.p.y - junction.y) < exclusion) continue;
                    if (std::hypot(s.p.x - p.x, s.p.y - p.y) < half_width + s.half_width + gap) return false;
                }
        return true;
    }

    void note_width(double hw) { max_half_width_ = std::max(max_half_width_, hw); }

private:
    static constexpr int kCell = 16;
    struct Sample {
        PointF p;
        double half_width;
        int owner;
    };
    int cols_, rows_;
    std::vector<std::vector<Sample>> cells_;
    double max_half_width_ = 0.0;
};

struct Pending {
    int parent;
    PointF start;
    double heading;  // radians, base heading
    int generation;
};

}  // namespace

void TreeSpec::validate() const {
    if (width < 8 || height < 8) input_error("synth: canvas must be at least 8x8");
    if (generations < 1) input_error("synth: generations must be >= 1");
    if (!(length_min > 0.0) || !(length_max >= length_min)) input_error("synth: bad segment length range");
    if (!(length_decay > 0.0)) input_error("synth: length_decay must be > 0");
    if (child_angles_deg.empty()) input_error("synth: child_angles_deg must be nonempty");
    if (!(root_width > 0.0) || !(taper > 0.0)) input_error("synth: widths must be positive");
    const double leaf_width = root_width * std::pow(taper, generations - 1);
    if (leaf_width < 2.0) input_error("synth: leaf width must be >= 2 px");
    if (wiggle_amplitude < 0.0 || !(wiggle_period > 0.0)) input_error("synth: bad wiggle");
    if (wiggle_jitter < 0.0 || wiggle_jitter > 1.0) input_error("synth: wiggle_jitter must be in [0,1]");
    if (angle_jitter_deg < 0.0) input_error("synth: angle_jitter_deg must be >= 0");
    if (clearance < 0.0 || margin < 0.0) input_error("synth: clearance and margin must be >= 0");
}

void rasterize_segment(const SegmentTruth& seg, Mask& mask) {
    const double r = seg.width / 2.0;
    const auto& pts = seg.polyline;
    for (std::size_t k = 0; k + 1 < pts.size() || (pts.size() == 1 && k == 0); ++k) {
        const PointF a = pts[k];
        const PointF b = pts.size() == 1 ? pts[0] : pts[k + 1];
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
        const int x1 = std::min(mask.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
        const int y1 = std::min(mask.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double t = len2 > 0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double ex = a.x + t * dx - x, ey = a.y + t * dy - y;
                if (ex * ex + ey * ey <= r * r) mask.at(x, y) = 1;
            }
        if (pts.size() == 1) break;
    }
}

Scene generate(const TreeSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    GroundTruth gt;
    Occupancy occ(spec.width, spec.height);
    std::vector<Pending> frontier{{-1, {spec.root_x, spec.root_y}, rad(spec.root_heading_deg), 1}};

    auto fits_canvas = [&](PointF p, double hw) {
        return p.x >= spec.margin + hw && p.y >= spec.margin + hw && p.x <= spec.width - 1 - spec.margin - hw &&
               p.y <= spec.height - 1 - spec.margin - hw;
    };

    while (!frontier.empty()) {
        // Children of one junction are placed together and committed all-or-nothing,
        // so every junction in the truth has its full set of children.
        std::vector<Pending> next;
        std::size_t i = 0;
        while (i < frontier.size()) {
            std::size_t j = i;
            while (j < frontier.size() && frontier[j].parent == frontier[i].parent) ++j;

            std::vector<SegmentTruth> group;
            std::vector<Curve> curves;
            bool ok = true;
            Occupancy trial = occ;
            for (std::size_t k = i; k < j; ++k) {
                const Pending& pd = frontier[k];
                const int g = pd.generation;
                Curve c;
                c.start = pd.start;
                c.heading = pd.heading;
                const double scale = std::pow(spec.length_decay, g - 1);
                const double nominal = (spec.length_min + (spec.length_max - spec.length_min) * unit(rng)) * scale;
                c.amplitude = spec.wiggle_amplitude * (1.0 + spec.wiggle_jitter * (2.0 * unit(rng) - 1.0));
                c.period = spec.wiggle_period;
                const double w = spec.root_width * std::pow(spec.taper, g - 1);
                const double hw = w / 2.0;
                const double parent_w = pd.parent >= 0 ? gt.segments[pd.parent].width : w;
                const double exclusion = 3.0 * parent_w + spec.clearance;

                double usable = nominal;
                for (double t = 0.0; t <= nominal; t += 0.5) {
                    const PointF p = c.at(t);
                    const bool near_start = std::hypot(p.x - c.start.x, p.y - c.start.y) < exclusion;
                    if (!fits_canvas(p, hw) || (!near_start && !trial.clear(p, hw, spec.clearance, c.start, exclusion))) {
                        usable = std::max(0.0, t - 0.5);
                        break;
                    }
                }
                // Clipped children that would be stubs are dropped; the root is kept whenever it shows at all.
                const double min_keep = pd.parent < 0 ? 3.0 * w : std::max(0.5 * spec.length_min * scale, 3.0 * w);
                if (usable < min_keep) {
                    ok = false;
                    break;
                }
                c.length = usable;

                SegmentTruth seg;
                seg.parent = pd.parent;
                seg.generation = g;
                seg.start = c.start;
                seg.base_heading_deg = deg(c.heading);
                seg.base_length = c.length;
                seg.amplitude = c.amplitude;
                seg.period = c.period;
                seg.width = w;
                seg.truncated = usable < nominal;
                seg.polyline = sample_curve(c);
                seg.arc_length = arc_length(c, c.length);
                const PointF end = c.at(c.length);
                seg.chord_length = std::hypot(end.x - c.start.x, end.y - c.start.y);
                const PointF t0 = c.tangent(0.0), t1 = c.tangent(c.length);
                seg.heading_start_deg = deg(std::atan2(t0.y, t0.x));
                seg.heading_end_deg = deg(std::atan2(t1.y, t1.x));
                trial.note_width(hw);
                trial.add(seg.polyline, hw, -1);
                group.push_back(std::move(seg));
                curves.push_back(c);
            }

            if (ok) {
                occ = std::move(trial);
                for (std::size_t k = 0; k < group.size(); ++k) {
                    SegmentTruth& seg = group[k];
                    seg.id = static_cast<int>(gt.segments.size());
                    if (seg.parent >= 0) gt.segments[seg.parent].children.push_back(seg.id);
                    const bool grow = seg.generation < spec.generations && !seg.truncated;
                    const Curve& c = curves[k];
                    if (grow) {
                        for (double off : spec.child_angles_deg) {
                            const double jitter = spec.angle_jitter_deg * (2.0 * unit(rng) - 1.0);
                            next.push_back({seg.id, c.at(c.length), c.heading + rad(off + jitter), seg.generation + 1});
                        }
                    }
                    gt.segments.push_back(std::move(seg));
                }
            }
            i = j;
        }
        frontier = std::move(next);
    }
    if (gt.segments.empty()) input_error("synth: spec produced zero on-canvas segments");

    // A junction whose children were all rejected leaves a leaf; junction records
    // are only made for parents that kept children.
    for (auto& seg : gt.segments) {
        if (seg.children.empty()) continue;
        JunctionTruth j;
        j.parent = seg.id;
        j.children = seg.children;
        j.position = seg.polyline.back();
        const double s0 = gt.direction_skip * 0.5 * seg.width;
        const PointF parent_dir = branch_direction(seg.polyline, s0, gt.direction_step, gt.direction_points, true);
        const PointF inflow{-parent_dir.x, -parent_dir.y};
        std::vector<PointF> child_dirs;
        for (int c : seg.children) {
            const auto& child = gt.segments[c];
            j.child_offsets_deg.push_back(child.base_heading_deg - seg.base_heading_deg);
            child_dirs.push_back(branch_direction(child.polyline, s0, gt.direction_step, gt.direction_points, false));
            j.alpha_deg.push_back(angle_between(inflow, child_dirs.back()));
        }
        if (child_dirs.size() >= 2) j.branching_angle_deg = angle_between(child_dirs[0], child_dirs[1]);
        gt.junctions.push_back(std::move(j));
    }

    // Strahler order, leaves up (children always have larger ids).
    for (auto it = gt.segments.rbegin(); it != gt.segments.rend(); ++it) {
        int top = 0, count = 0;
        for (int c : it->children) {
            const int s = gt.segments[c].strahler;
            if (s > top) {
                top = s;
                count = 1;
            } else if (s == top) {
                ++count;
            }
        }
        it->strahler = top == 0 ? 1 : (count >= 2 ? top + 1 : top);
    }

    for (const auto& seg : gt.segments) {
        gt.depth = std::max(gt.depth, seg.generation);
        gt.total_arc_length += seg.arc_length;
        if (seg.children.empty()) ++gt.terminal_count;
    }
    gt.junction_count = static_cast<int>(gt.junctions.size());
    gt.endpoint_count = gt.terminal_count + 1;

    Scene scene;
    scene.mask = Mask(spec.width, spec.height);
    for (const auto& seg : gt.segments) rasterize_segment(seg, scene.mask);
    scene.image = GrayImage(spec.width, spec.height);
    std::normal_distribution<double> noise(0.0, 8.0);
    for (std::size_t i = 0; i < scene.image.pixels.size(); ++i) {
        const double v = (scene.mask.bits[i] ? 200.0 : 30.0) + noise(rng);
        scene.image.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    scene.truth = std::move(gt);
    return scene;
}

Mask perturb(const Mask& mask, const PerturbSpec& spec) {
    if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate <= 1.0) ||
        !(spec.dilation_noise >= 0.0 && spec.dilation_noise <= 1.0))
        input_error("perturb: rates must be in [0,1]");
    if (spec.cell < 1) input_error("perturb: cell must be >= 1");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Mask out = mask;
    const int cols = (mask.width + spec.cell - 1) / spec.cell;
    const int rows = (mask.height + spec.cell - 1) / spec.cell;
    for (int cy = 0; cy < rows; ++cy)
        for (int cx = 0; cx < cols; ++cx) {
            if (!(unit(rng) < spec.dropout_rate)) continue;
            for (int y = cy * spec.cell; y < std::min(mask.height, (cy + 1) * spec.cell); ++y)
                for (int x = cx * spec.cell; x < std::min(mask.width, (cx + 1) * spec.cell); ++x) out.at(x, y) = 0;
        }
    if (spec.dilation_noise <= 0.0) return out;

    const Mask base = out;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            const std::uint8_t v = base.at(x, y);
            const bool boundary = (x > 0 && base.at(x - 1, y) != v) || (x + 1 < mask.width && base.at(x + 1, y) != v) ||
                                  (y > 0 && base.at(x, y - 1) != v) || (y + 1 < mask.height && base.at(x, y + 1) != v);
            if (boundary && unit(rng) < spec.dilation_noise) out.at(x, y) = v ? 0 : 1;
        }
    return out;
}

std::string GroundTruth::to_json() const {
    json doc;
    doc["schema"] = "gtruth/1";
    doc["junction_count"] = junction_count;
    doc["terminal_count"] = terminal_count;
    doc["endpoint_count"] = endpoint_count;
    doc["depth"] = depth;
    doc["total_arc_length"] = total_arc_length;
    doc["direction_skip"] = direction_skip;
    doc["direction_step"] = direction_step;
    doc["direction_points"] = direction_points;
    json segs = json::array();
    for (const auto& s : segments) {
        json poly = json::array();
        // Every fourth analytic sample (one per base pixel) keeps the file readable.
        for (std::size_t i = 0; i < s.polyline.size(); i += 4) poly.push_back({s.polyline[i].x, s.polyline[i].y});
        if ((s.polyline.size() - 1) % 4 != 0) poly.push_back({s.polyline.back().x, s.polyline.back().y});
        segs.push_back({{"id", s.id},
                        {"parent", s.parent},
                        {"generation", s.generation},
                        {"children", s.children},
                        {"width", s.width},
                        {"arc_length", s.arc_length},
                        {"chord_length", s.chord_length},
                        {"base_heading_deg", s.base_heading_deg},
                        {"heading_start_deg", s.heading_start_deg},
                        {"heading_end_deg", s.heading_end_deg},
                        {"amplitude", s.amplitude},
                        {"period", s.period},
                        {"truncated", s.truncated},
                        {"strahler", s.strahler},
                        {"level", s.generation - 1},
                        {"polyline", std::move(poly)}});
    }
    doc["segments"] = std::move(segs);
    json juncs = json::array();
    for (const auto& j : junctions)
        juncs.push_back({{"parent", j.parent},
                         {"children", j.children},
                         {"x", j.position.x},
                         {"y", j.position.y},
                         {"child_offsets_deg", j.child_offsets_deg},
                         {"branching_angle_deg", j.branching_angle_deg},
                         {"alpha_deg", j.alpha_deg}});
    doc["junctions"] = std::move(juncs);
    return doc.dump(1);
}

void write_scene_bundle(const Scene& scene, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_image(scene.image, dir / "image.png");
    write_mask(scene.mask, dir / "mask.png");
    write_text_atomic(dir / "truth.json", scene.truth.to_json());
}

std::string tree_spec_to_json(const TreeSpec& s) {
    json doc{{"width", s.width},
             {"height", s.height},
             {"root_x", s.root_x},
             {"root_y", s.root_y},
             {"root_heading_deg", s.root_heading_deg},
             {"generations", s.generations},
             {"length_min", s.length_min},
             {"length_max", s.length_max},
             {"length_decay", s.length_decay},
             {"child_angles_deg", s.child_angles_deg},
             {"angle_jitter_deg", s.angle_jitter_deg},
             {"root_width", s.root_width},
             {"taper", s.taper},
             {"wiggle_amplitude", s.wiggle_amplitude},
             {"wiggle_period", s.wiggle_period},
             {"wiggle_jitter", s.wiggle_jitter},
             {"clearance", s.clearance},
             {"margin", s.margin},
             {"seed", s.seed}};
    return doc.dump(1);
}

TreeSpec tree_spec_from_json(const std::string& text) {
    TreeSpec s;
    try {
        const json doc = json::parse(text);
        if (!doc.is_object()) input_error("tree spec: expected a JSON object");
        for (const auto& [key, value] : doc.items()) {
            if (key == "width") s.width = value.get<int>();
            else if (key == "height") s.height = value.get<int>();
            else if (key == "root_x") s.root_x = value.get<double>();
            else if (key == "root_y") s.root_y = value.get<double>();
            else if (key == "root_heading_deg") s.root_heading_deg = value.get<double>();
            else if (key == "generations") s.generations = value.get<int>();
            else if (key == "length_min") s.length_min = value.get<double>();
            else if (key == "length_max") s.length_max = value.get<double>();
            else if (key == "length_decay") s.length_decay = value.get<double>();
            else if (key == "child_angles_deg") s.child_angles_deg = value.get<std::vector<double>>();
            else if (key == "angle_jitter_deg") s.angle_jitter_deg = value.get<double>();
            else if (key == "root_width") s.root_width = value.get<double>();
            else if (key == "taper") s.taper = value.get<double>();
            else if (key == "wiggle_amplitude") s.wiggle_amplitude = value.get<double>();
            else if (key == "wiggle_period") s.wiggle_period = value.get<double>();
            else if (key == "wiggle_jitter") s.wiggle_jitter = value.get<double>();
            else if (key == "clearance") s.clearance = value.get<double>();
            else if (key == "margin") s.margin = value.get<double>();
            else if (key == "seed") s.seed = value.get<std::uint64_t>();
            else input_error("tree spec: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        input_error(std::string("tree spec: ") + e.what());
    }
    s.validate();
    return s;
}

TreeSpec oracle_scene_spec(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    TreeSpec s;
    s.width = 1024;
    s.height = 1024;
    s.root_x = 60.0 + 40.0 * unit(rng);
    s.root_y = 412.0 + 200.0 * unit(rng);
    s.root_heading_deg = -15.0 + 30.0 * unit(rng);
    s.generations = 4;
    s.length_min = 150.0;
    s.length_max = 230.0;
    s.length_decay = 0.8;
    s.child_angles_deg = {42.5, -42.5};
    s.angle_jitter_deg = 12.5;
    s.root_width = 12.0;
    s.taper = 0.75;
    s.wiggle_amplitude = 3.0;
    s.wiggle_period = 90.0;
    s.wiggle_jitter = 0.5;
    s.clearance = 6.0;
    s.margin = 6.0;
    s.seed = seed;
    return s;
}

}  // namespace chorovessel
