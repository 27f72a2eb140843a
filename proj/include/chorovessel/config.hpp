#pragma once

#include <cstdint>
#include <string>

#include "chorovessel/evaluation.hpp"
#include "chorovessel/hitl.hpp"
#include "chorovessel/morphometry.hpp"
#include "chorovessel/presegment.hpp"
#include "chorovessel/raster.hpp"
#include "chorovessel/stats.hpp"
#include "chorovessel/vesselgraph.hpp"

namespace chorovessel {

struct PipelineConfig {
    std::uint64_t seed = 42;
    int threads = 1;
    SegmenterBackend backend = VesselnessParams{};
    ClaheParams clahe;
    GraphOptions graph;
    MorphometryOptions morphometry;
    int n_boot = 1000;
    double outlier_range = 3.0;
    double alpha = 0.05;
    HitlConfig hitl;
    LoopSimSpec loop_sim;
};

/// Applies a JSON object of overrides on top of `base`. Sections: seed, threads,
/// backend, clahe, graph, morphometry, evaluation, stats, hitl, loop_sim.
/// Unknown keys and wrong types are input errors.
PipelineConfig config_from_json(const std::string& text, PipelineConfig base = {});
std::string config_to_json(const PipelineConfig& config);

}  // namespace chorovessel
