#include "chorovessel/config.hpp"

#include <json.hpp>
#include <set>

#include "chorovessel/error.hpp"

namespace chorovessel {

using ojson = nlohmann::ordered_json;

namespace {

void only_keys(const ojson& j, const std::string& section, std::initializer_list<const char*> keys) {
    if (!j.is_object()) input_error("config: '" + section + "' must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) input_error("config: unknown key '" + (section.empty() ? k : section + "." + k) + "'");
}

template <class T>
void take(const ojson& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        input_error("config: bad type for '" + section + "." + key + "'");
    }
}

}  // namespace

PipelineConfig config_from_json(const std::string& text, PipelineConfig c) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        input_error(std::string("config: invalid JSON: ") + e.what());
    }
    only_keys(j, "", {"seed", "threads", "backend", "clahe", "graph", "morphometry", "evaluation", "stats", "hitl", "loop_sim"});
    take(j, "seed", c.seed, "");
    take(j, "threads", c.threads, "");
    if (c.threads < 1) input_error("config: threads must be >= 1");
    if (j.contains("backend")) c.backend = backend_from_json(j["backend"].dump());
    if (j.contains("clahe")) {
        const auto& s = j["clahe"];
        only_keys(s, "clahe", {"tiles", "clip"});
        take(s, "tiles", c.clahe.tiles, "clahe");
        take(s, "clip", c.clahe.clip, "clahe");
    }
    if (j.contains("graph")) {
        only_keys(j["graph"], "graph", {"spur_length"});
        take(j["graph"], "spur_length", c.graph.spur_length, "graph");
    }
    if (j.contains("morphometry")) {
        const auto& s = j["morphometry"];
        only_keys(s, "morphometry",
                  {"resample_step", "inflection_eps", "caliber_trim", "smooth_half_window", "direction_points",
                   "junction_skip", "terminal_points"});
        auto& m = c.morphometry;
        take(s, "resample_step", m.resample_step, "morphometry");
        take(s, "inflection_eps", m.inflection_eps, "morphometry");
        take(s, "caliber_trim", m.caliber_trim, "morphometry");
        take(s, "smooth_half_window", m.smooth_half_window, "morphometry");
        take(s, "direction_points", m.direction_points, "morphometry");
        take(s, "junction_skip", m.junction_skip, "morphometry");
        take(s, "terminal_points", m.terminal_points, "morphometry");
        if (!(m.resample_step > 0)) input_error("config: morphometry.resample_step must be > 0");
    }
    if (j.contains("evaluation")) {
        only_keys(j["evaluation"], "evaluation", {"n_boot"});
        take(j["evaluation"], "n_boot", c.n_boot, "evaluation");
    }
    if (j.contains("stats")) {
        only_keys(j["stats"], "stats", {"outlier_range", "alpha"});
        take(j["stats"], "outlier_range", c.outlier_range, "stats");
        take(j["stats"], "alpha", c.alpha, "stats");
    }
    if (j.contains("hitl")) {
        only_keys(j["hitl"], "hitl", {"stop_dice", "idle_cutoff_ms"});
        take(j["hitl"], "stop_dice", c.hitl.stop_dice, "hitl");
        take(j["hitl"], "idle_cutoff_ms", c.hitl.idle_cutoff_ms, "hitl");
    }
    if (j.contains("loop_sim")) {
        const auto& s = j["loop_sim"];
        only_keys(s, "loop_sim", {"rounds", "images_per_round", "size", "fidelity"});
        take(s, "rounds", c.loop_sim.rounds, "loop_sim");
        take(s, "images_per_round", c.loop_sim.images_per_round, "loop_sim");
        take(s, "size", c.loop_sim.size, "loop_sim");
        take(s, "fidelity", c.loop_sim.fidelity, "loop_sim");
    }
    c.hitl.threads = c.threads;
    c.loop_sim.threads = c.threads;
    c.loop_sim.seed = c.seed;
    return c;
}

std::string config_to_json(const PipelineConfig& c) {
    const auto& m = c.morphometry;
    ojson j = {{"seed", c.seed},
               {"threads", c.threads},
               {"backend", ojson::parse(backend_to_json(c.backend))},
               {"clahe", {{"tiles", c.clahe.tiles}, {"clip", c.clahe.clip}}},
               {"graph", {{"spur_length", c.graph.spur_length}}},
               {"morphometry",
                {{"resample_step", m.resample_step},
                 {"inflection_eps", m.inflection_eps},
                 {"caliber_trim", m.caliber_trim},
                 {"smooth_half_window", m.smooth_half_window},
                 {"direction_points", m.direction_points},
                 {"junction_skip", m.junction_skip},
                 {"terminal_points", m.terminal_points}}},
               {"evaluation", {{"n_boot", c.n_boot}}},
               {"stats", {{"outlier_range", c.outlier_range}, {"alpha", c.alpha}}},
               {"hitl", {{"stop_dice", c.hitl.stop_dice}, {"idle_cutoff_ms", c.hitl.idle_cutoff_ms}}},
               {"loop_sim",
                {{"rounds", c.loop_sim.rounds},
                 {"images_per_round", c.loop_sim.images_per_round},
                 {"size", c.loop_sim.size},
                 {"fidelity", c.loop_sim.fidelity}}}};
    return j.dump(2) + "\n";
}

}  // namespace chorovessel
