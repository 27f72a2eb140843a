#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chorovessel/raster.hpp"
#include "chorovessel/synth.hpp"
#include "chorovessel/vesselgraph.hpp"

namespace chorovessel {

using Value = std::optional<double>;  // empty = missing, never 0

struct SegmentMetrics {
    int edge_id = 0;
    double arc_length = 0.0;
    double chord_length = 0.0;
    Value tortuosity;
    Value tortuosity_density;
    int inflection_count = 0;
    Value inflection_tortuosity;
    double curve_angle = 0.0;             // degrees
    Value curve_angle_tortuosity;         // degrees per vertex
    Value angle_tortuosity;               // degrees per pixel
    Value fractal_tortuosity;
    double mean_caliber = 0.0;
    double min_caliber = 0.0;
    double max_caliber = 0.0;
    double caliber_range = 0.0;
    double surface_area = 0.0;
    Value length_diameter_ratio;
    int strahler = 1;
    int level = 0;
    bool is_terminal = false;
    Value terminal_caliber;
};

struct JunctionMetrics {
    int node_id = 0;
    Value branching_angle;     // degrees
    Value angular_asymmetry;   // degrees
    Value asymmetry_ratio;     // (0,1]
};

struct MorphometryOptions {
    double resample_step = 5.0;
    double inflection_eps = 1e-3;
    int caliber_trim = 2;
    int smooth_half_window = 2;  // moving average over the pixel chain before resampling; 0 = off
    int direction_points = 10;   // resampled points used for branch directions
    double junction_skip = 1.5;  // branch directions start this many parent radii from the node
    int terminal_points = 5;     // trimmed calibers nearest the tip averaged for terminal_caliber
};

/// Uniform-arc resampling: points at 0, step, 2*step, ... plus the final vertex.
std::vector<PointF> resample_polyline(const std::vector<PointF>& poly, double step);
/// Centered moving average; the window shrinks near the ends so they stay fixed.
std::vector<PointF> smooth_polyline(const std::vector<PointF>& poly, int half_window);
std::vector<PointF> to_points(const std::vector<Pixel>& poly);

SegmentMetrics segment_metrics(const VesselGraph& graph, const GraphEdge& edge, const MorphometryOptions& opt = {});
std::vector<JunctionMetrics> branching_metrics(const VesselGraph& graph, const MorphometryOptions& opt = {});

/// Box-count dimension of the foreground: N(s) over the given box sizes, grid
/// anchored at the origin, least-squares slope of log N vs log(1/s), clamped to
/// [1,2]. Missing when fewer than two sizes see foreground.
Value box_count_dimension(const Mask& mask, const std::vector<int>& sizes);
/// Sizes 2, 4, ... up to min(w,h)/4.
std::vector<int> image_box_sizes(int width, int height);

enum class Family { Density, Complexity, Tortuosity, Caliber, Branching };
std::string_view family_name(Family f);

struct CatalogEntry {
    std::string name;
    Family family;
};

inline constexpr std::string_view kCatalogVersion = "morpho/1";

/// Per-image scalars first, then "<metric>_<stat>" for every per-segment and
/// per-junction metric with stat in mean, sd, max, min.
const std::vector<CatalogEntry>& metrics_catalog();
/// Per-segment then per-junction metric names, in consolidation order.
const std::vector<std::string>& consolidated_metric_names();

struct ImageMetricsRow {
    std::string image_id;
    std::vector<Value> values;  // aligned with metrics_catalog()

    Value get(std::string_view name) const;
};

struct Summary {
    Value mean, sd, max, min;
};
Summary consolidate(const std::vector<Value>& values);

ImageMetricsRow image_metrics(const std::string& image_id, const Mask& mask, const VesselGraph& graph,
                              const MorphometryOptions& opt = {});

/// header "image_id" + catalog names; missing = empty cell; LF endings.
std::string metrics_csv(const std::vector<ImageMetricsRow>& rows);

}  // namespace chorovessel
