#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chorovessel/raster.hpp"

namespace chorovessel {

struct PointF {
    double x = 0.0;
    double y = 0.0;
};

/// Recipe for a synthetic branching vessel tree. Every segment is a straight
/// base line of random length with a sinusoidal wiggle laid across it; children
/// leave the parent's end at fixed offsets from the parent's base heading.
struct TreeSpec {
    int width = 512;
    int height = 512;
    double root_x = 40.0;
    double root_y = 256.0;
    double root_heading_deg = 0.0;  // 0 = +x, 90 = +y (image rows grow downward)
    int generations = 3;
    double length_min = 80.0;
    double length_max = 120.0;
    double length_decay = 1.0;                       // per-generation length multiplier
    std::vector<double> child_angles_deg{35.0, -35.0};  // one entry per child
    double angle_jitter_deg = 0.0;                   // uniform +/- jitter per child
    double root_width = 8.0;
    double taper = 0.8;                              // per-generation width multiplier
    double wiggle_amplitude = 0.0;
    double wiggle_period = 60.0;
    double wiggle_jitter = 0.0;                      // per-segment amplitude scale in [1-j, 1+j]
    double clearance = 4.0;                          // min gap to unrelated vessels, pixels
    double margin = 4.0;                             // min gap to the canvas border, pixels
    std::uint64_t seed = 42;

    void validate() const;
};

struct SegmentTruth {
    int id = 0;
    int parent = -1;
    int generation = 1;                // 1 = root segment
    std::vector<int> children;
    PointF start;
    double base_heading_deg = 0.0;
    double base_length = 0.0;          // after truncation
    double amplitude = 0.0;
    double period = 0.0;
    double width = 0.0;
    bool truncated = false;
    std::vector<PointF> polyline;      // dense samples of the analytic curve
    double arc_length = 0.0;           // quadrature of the analytic curve
    double chord_length = 0.0;
    double heading_start_deg = 0.0;    // tangent headings
    double heading_end_deg = 0.0;
    int strahler = 1;
};

struct JunctionTruth {
    int parent = 0;                    // segment ending at the junction
    std::vector<int> children;
    PointF position;
    std::vector<double> child_offsets_deg;  // exact offsets from the parent's base heading
    /// Branch directions: principal axis of `direction_points` analytic samples
    /// spaced `direction_step` apart, starting `direction_skip` radii of the parent
    /// out from the junction.
    double branching_angle_deg = 0.0;
    std::vector<double> alpha_deg;     // reversed-parent vs child direction angles
};

struct GroundTruth {
    std::vector<SegmentTruth> segments;
    std::vector<JunctionTruth> junctions;
    int junction_count = 0;
    int terminal_count = 0;            // leaf segments (free vessel tips, root excluded)
    int endpoint_count = 0;            // degree-1 points: tips plus the root start
    int depth = 0;                     // deepest generation
    double total_arc_length = 0.0;
    double direction_skip = 1.5;
    double direction_step = 5.0;
    int direction_points = 10;

    std::string to_json() const;  // "gtruth/1"
};

struct Scene {
    Mask mask;
    GrayImage image;
    GroundTruth truth;
};

Scene generate(const TreeSpec& spec);

/// Pixel centers within width/2 of the curve, for one segment.
void rasterize_segment(const SegmentTruth& seg, Mask& mask);

struct PerturbSpec {
    double dropout_rate = 0.0;     // probability of deleting each vessel span (cell)
    double dilation_noise = 0.0;   // probability of flipping each boundary pixel
    std::uint64_t seed = 42;
    int cell = 24;                 // span size in pixels
};

Mask perturb(const Mask& mask, const PerturbSpec& spec);

/// image.png, mask.png, truth.json
void write_scene_bundle(const Scene& scene, const std::filesystem::path& dir);

TreeSpec tree_spec_from_json(const std::string& text);
std::string tree_spec_to_json(const TreeSpec& spec);

/// Seeded family of scenes used by the oracle suites: 1024x1024 canvases,
/// widths from 12 down to >= 4 px, branching offsets 30-55 degrees.
TreeSpec oracle_scene_spec(std::uint64_t seed);

}  // namespace chorovessel
