#include "chorovessel/chorovessel.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "chorovessel/config.hpp"
#include "chorovessel/error.hpp"
#include "chorovessel/evaluation.hpp"
#include "chorovessel/hitl.hpp"
#include "chorovessel/hitl_http.hpp"
#include "chorovessel/morphometry.hpp"
#include "chorovessel/parallel.hpp"
#include "chorovessel/stats.hpp"
#include "chorovessel/synth.hpp"
#include "chorovessel/vesselgraph.hpp"

using namespace chorovessel;

struct chv_config {
    PipelineConfig cfg;
};

struct chv_project {
    std::unique_ptr<Project> project;
};

struct chv_server {
    std::unique_ptr<HitlServer> server;
};

namespace {

thread_local std::string last_error;

int code_of(ErrorKind k) {
    switch (k) {
        case ErrorKind::Input: return CHV_ERR_INPUT;
        case ErrorKind::NotFound: return CHV_ERR_NOT_FOUND;
        case ErrorKind::Conflict: return CHV_ERR_CONFLICT;
        case ErrorKind::Backend: return CHV_ERR_BACKEND;
        case ErrorKind::Internal: return CHV_ERR_INTERNAL;
    }
    return CHV_ERR_INTERNAL;
}

template <class Fn>
int guard(Fn&& fn) {
    try {
        fn();
        last_error.clear();
        return CHV_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return code_of(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        last_error = e.what();
        return CHV_ERR_INPUT;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return CHV_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return CHV_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return CHV_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (!p) input_error(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

const PipelineConfig& config_or_default(const chv_config* c) {
    static const PipelineConfig defaults;
    return c ? c->cfg : defaults;
}

std::string text_file(const char* path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

}  // namespace

extern "C" {

const char* chv_version(void) { return "0.1.0"; }
const char* chv_last_error(void) { return last_error.c_str(); }
void chv_free(void* p) { std::free(p); }

int chv_config_create(const char* json, chv_config** out) {
    return guard([&] {
        need(out, "out");
        auto c = std::make_unique<chv_config>();
        if (json && *json) c->cfg = config_from_json(json);
        *out = c.release();
    });
}

int chv_config_set_seed(chv_config* cfg, uint64_t seed) {
    return guard([&] {
        need(cfg, "config");
        cfg->cfg.seed = seed;
        cfg->cfg.loop_sim.seed = seed;
    });
}

int chv_config_set_threads(chv_config* cfg, int threads) {
    return guard([&] {
        need(cfg, "config");
        if (threads < 1) input_error("threads must be >= 1");
        cfg->cfg.threads = threads;
        cfg->cfg.hitl.threads = threads;
        cfg->cfg.loop_sim.threads = threads;
    });
}

int chv_config_set_endpoint(chv_config* cfg, const char* url) {
    return guard([&] {
        need(cfg, "config");
        need(url, "url");
        ExternalEndpoint e;
        if (const auto* prev = std::get_if<ExternalEndpoint>(&cfg->cfg.backend)) e = *prev;
        e.url = url;
        cfg->cfg.backend = e;
    });
}

int chv_config_to_json(const chv_config* cfg, char** out) {
    return guard([&] {
        need(out, "out");
        *out = dup_string(config_to_json(config_or_default(cfg)));
    });
}

void chv_config_destroy(chv_config* cfg) { delete cfg; }

int chv_preseg(const chv_config* cfg, const char* image_path, const char* prob_out, const char* mask_out) {
    return guard([&] {
        need(image_path, "image_path");
        need(mask_out, "mask_out");
        const auto prop = propose(read_image(image_path), config_or_default(cfg).backend);
        if (prob_out) write_probability(prop.grid, prob_out);
        write_mask(prop.mask, mask_out);
    });
}

int chv_graph(const chv_config* cfg, const char* mask_path, const char* json_out) {
    return guard([&] {
        need(mask_path, "mask_path");
        need(json_out, "json_out");
        const auto g = build_graph(skeletonize(read_mask(mask_path)), config_or_default(cfg).graph);
        write_text_atomic(json_out, graph_to_json(g));
    });
}

int chv_metrics(const chv_config* cfg, const char* const* ids, const char* const* mask_paths, size_t n,
                const char* csv_out) {
    return guard([&] {
        need(csv_out, "csv_out");
        if (n > 0) {
            need(ids, "ids");
            need(mask_paths, "mask_paths");
        }
        const auto& c = config_or_default(cfg);
        std::vector<ImageMetricsRow> rows(n);
        parallel_for(n, c.threads, [&](std::size_t i) {
            const Mask m = read_mask(mask_paths[i]);
            rows[i] = image_metrics(ids[i], m, build_graph(skeletonize(m), c.graph), c.morphometry);
        });
        write_text_atomic(csv_out, metrics_csv(rows));
    });
}

int chv_eval(const chv_config* cfg, const char* const* ids, const char* const* pred_paths,
             const char* const* truth_paths, const char* const* prob_paths, size_t n, const char* json_out,
             const char* svg_out) {
    return guard([&] {
        need(json_out, "json_out");
        if (n == 0) input_error("eval: no image pairs");
        need(ids, "ids");
        need(pred_paths, "pred_paths");
        need(truth_paths, "truth_paths");
        const auto& c = config_or_default(cfg);
        std::vector<EvalPair> pairs(n);
        parallel_for(n, c.threads, [&](std::size_t i) {
            pairs[i].id = ids[i];
            pairs[i].pred = read_mask(pred_paths[i]);
            pairs[i].truth = read_mask(truth_paths[i]);
            if (prob_paths) pairs[i].prob = read_probability(prob_paths[i]);
        });
        BootstrapOptions opt;
        opt.n_boot = c.n_boot;
        opt.seed = c.seed;
        opt.threads = c.threads;
        const auto rep = bootstrap_report(pairs, opt);
        write_text_atomic(json_out, rep.to_json());
        if (svg_out) write_text_atomic(svg_out, report_svg(rep));
    });
}

int chv_assoc(const chv_config* cfg, const char* analysis_csv, const char* title, const char* csv_out,
              const char* svg_out) {
    return guard([&] {
        need(analysis_csv, "analysis_csv");
        need(csv_out, "csv_out");
        const auto& c = config_or_default(cfg);
        AssociationOptions opt;
        opt.outlier_range = c.outlier_range;
        opt.alpha = c.alpha;
        opt.threads = c.threads;
        const auto res = run_association(read_analysis_csv(text_file(analysis_csv)), opt);
        write_text_atomic(csv_out, association_csv(res));
        if (svg_out) write_text_atomic(svg_out, forest_svg(res, title ? title : "association"));
    });
}

int chv_synth(const char* spec_json, const uint64_t* seed_override, const char* out_dir) {
    return guard([&] {
        need(spec_json, "spec_json");
        need(out_dir, "out_dir");
        auto spec = tree_spec_from_json(spec_json);
        if (seed_override) spec.seed = *seed_override;
        write_scene_bundle(generate(spec), out_dir);
        write_text_atomic(std::filesystem::path(out_dir) / "spec.json", tree_spec_to_json(spec));
    });
}

int chv_loop_sim(const chv_config* cfg, const char* project_dir, const char* json_out) {
    return guard([&] {
        need(project_dir, "project_dir");
        const auto& c = config_or_default(cfg);
        auto spec = c.loop_sim;
        spec.seed = c.seed;
        spec.threads = c.threads;
        const auto res = run_loop_sim(spec, project_dir);
        if (json_out) write_text_atomic(json_out, res.to_json());
    });
}

int chv_project_create(const char* dir, const char* id, const chv_config* cfg, chv_project** out) {
    return guard([&] {
        need(dir, "dir");
        need(id, "id");
        need(out, "out");
        const auto& c = config_or_default(cfg);
        auto hc = c.hitl;
        hc.threads = c.threads;
        auto p = std::make_unique<chv_project>();
        p->project = Project::create(dir, id, c.backend, hc);
        *out = p.release();
    });
}

int chv_project_open(const char* dir, chv_project** out) {
    return guard([&] {
        need(dir, "dir");
        need(out, "out");
        auto p = std::make_unique<chv_project>();
        p->project = Project::open(dir);
        *out = p.release();
    });
}

int chv_project_add_image(chv_project* p, const char* id, const char* image_path, const char* cohort, const char* view,
                          const char* truth_path) {
    return guard([&] {
        need(p, "project");
        need(id, "id");
        need(image_path, "image_path");
        std::optional<Mask> truth;
        if (truth_path) truth = read_mask(truth_path);
        p->project->add_image(id, read_image(image_path), cohort ? cohort : "", view ? view : "standard",
                              truth ? &*truth : nullptr);
    });
}

int chv_project_start_round(chv_project* p, const char* const* ids, size_t n) {
    return guard([&] {
        need(p, "project");
        if (n > 0) need(ids, "ids");
        p->project->start_round(std::vector<std::string>(ids, ids + n));
    });
}

int chv_project_simulate(chv_project* p, double fidelity, uint64_t seed) {
    return guard([&] {
        need(p, "project");
        p->project->simulate_annotator(fidelity, seed);
    });
}

int chv_project_finalize(chv_project* p, int round, char** report_json) {
    return guard([&] {
        need(p, "project");
        const auto rep = p->project->finalize_round(round);
        if (report_json) *report_json = dup_string(report_to_json(rep, round));
    });
}

int chv_project_state_json(chv_project* p, char** out) {
    return guard([&] {
        need(p, "project");
        need(out, "out");
        *out = dup_string(project_state_to_json(*p->project->snapshot()));
    });
}

void chv_project_close(chv_project* p) { delete p; }

int chv_server_create(chv_project* p, const char* host, int port, chv_server** out, int* bound_port) {
    return guard([&] {
        need(p, "project");
        need(out, "out");
        auto s = std::make_unique<chv_server>();
        s->server = std::make_unique<HitlServer>(*p->project);
        const int got = s->server->bind(host ? host : "127.0.0.1", port);
        if (got <= 0) input_error("cannot bind " + std::string(host ? host : "127.0.0.1") + ":" + std::to_string(port));
        if (bound_port) *bound_port = got;
        *out = s.release();
    });
}

int chv_server_run(chv_server* s) {
    return guard([&] {
        need(s, "server");
        s->server->run();
    });
}

void chv_server_stop(chv_server* s) {
    if (s) s->server->stop();
}

void chv_server_destroy(chv_server* s) { delete s; }

}  // extern "C"
