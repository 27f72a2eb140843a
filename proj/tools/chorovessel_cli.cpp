// Command-line front end. Talks to the library only through chorovessel.h.
#include <chorovessel/chorovessel.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <pthread.h>
#include <algorithm>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// exit 1 for anything the caller can fix, 2 for backend and internal failures
struct Failure {
    int code;
    std::string message;
};

[[noreturn]] void usage_error(const std::string& msg) { throw Failure{CHV_ERR_INPUT, msg}; }

void check(int rc) {
    if (rc != CHV_OK) throw Failure{rc, chv_last_error()};
}

int exit_code(int rc) { return rc == CHV_ERR_BACKEND || rc == CHV_ERR_INTERNAL ? 2 : 1; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) usage_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}


struct Common {
    std::string config_path;
    std::uint64_t seed = 42;
    int threads = 1;
    std::string endpoint;
    // loop-sim knobs, merged over the config file
    std::optional<int> rounds, images_per_round, size;
    std::optional<double> fidelity;
};

class Config {
public:
    explicit Config(const Common& c) {
        std::string path = c.config_path;
        if (path.empty())
            if (const char* env = std::getenv("CHOROVESSEL_CONFIG")) path = env;
        json j = json::object();
        if (!path.empty()) {
            try {
                j = json::parse(slurp(path));
            } catch (const json::parse_error& e) {
                usage_error("config " + path + ": " + e.what());
            }
            if (!j.is_object()) usage_error("config " + path + ": expected a JSON object");
        }
        if (c.rounds) j["loop_sim"]["rounds"] = *c.rounds;
        if (c.images_per_round) j["loop_sim"]["images_per_round"] = *c.images_per_round;
        if (c.size) j["loop_sim"]["size"] = *c.size;
        if (c.fidelity) j["loop_sim"]["fidelity"] = *c.fidelity;
        check(chv_config_create(j.dump().c_str(), &cfg_));
        check(chv_config_set_seed(cfg_, c.seed));
        check(chv_config_set_threads(cfg_, c.threads));
        if (!c.endpoint.empty()) check(chv_config_set_endpoint(cfg_, c.endpoint.c_str()));
    }
    ~Config() { chv_config_destroy(cfg_); }
    Config(const Config&) = delete;
    Config& operator=(const Config&) = delete;
    const chv_config* get() const { return cfg_; }

private:
    chv_config* cfg_ = nullptr;
};

// id -> path for every file in dir ending in ext, sorted by id
std::map<std::string, fs::path> listing(const fs::path& dir, const std::string& ext) {
    if (!fs::is_directory(dir)) usage_error("not a directory: " + dir.string());
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string name = e.path().filename().string();
        if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0)
            out.emplace(name.substr(0, name.size() - ext.size()), e.path());
    }
    return out;
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) usage_error("cannot create " + dir.string() + ": " + ec.message());
}

struct Cstrs {
    std::vector<std::string> keep;
    std::vector<const char*> ptrs;
    void add(std::string s) { keep.push_back(std::move(s)); }
    const char* const* data() {
        ptrs.clear();
        for (const auto& s : keep) ptrs.push_back(s.c_str());
        return ptrs.data();
    }
};

void add_common(CLI::App* sub, Common& c, bool stochastic) {
    sub->add_option("--config", c.config_path, "JSON overrides file (default: $CHOROVESSEL_CONFIG)");
    sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber)->default_val(1);
    if (stochastic) sub->add_option("--seed", c.seed, "Random seed")->default_val(42);
}

void serve(chv_project* project, const std::string& host, int port) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    chv_server* server = nullptr;
    int bound = 0;
    check(chv_server_create(project, host.c_str(), port, &server, &bound));
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        chv_server_stop(server);
    });
    std::cout << "listening on http://" << host << ":" << bound << std::endl;
    const int rc = chv_server_run(server);
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    chv_server_destroy(server);
    check(rc);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chorovessel: vessel segmentation, morphometry and annotation tools", "chorovessel"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(chv_version()));
    app.failure_message(CLI::FailureMessage::help);

    Common common;
    std::string input, output, pred_dir, truth_dir, prob_dir, title = "association", project_id, images_dir,
                                                                  host = "127.0.0.1";
    int port = 8080;
    bool with_prob = false;

    auto* preseg = app.add_subcommand("preseg", "Image PNG -> probability map and mask");
    preseg->add_option("--input", input, "Input image (8-bit grayscale PNG)")->required();
    preseg->add_option("--output", output, "Output directory: mask.png, probability.vprb")->required();
    preseg->add_option("--endpoint", common.endpoint, "External segmenter URL instead of the built-in filter");
    add_common(preseg, common, false);

    auto* graph = app.add_subcommand("graph", "Mask PNG -> vessel graph JSON");
    graph->add_option("--input", input, "Input mask PNG")->required();
    graph->add_option("--output", output, "Output graph JSON")->required();
    add_common(graph, common, false);

    auto* metrics = app.add_subcommand("metrics", "Directory of mask PNGs -> metrics CSV");
    metrics->add_option("--input", input, "Directory of <id>.png masks")->required();
    metrics->add_option("--output", output, "Output CSV, one row per image id")->required();
    add_common(metrics, common, false);

    auto* eval = app.add_subcommand("eval", "Predicted vs reference masks -> report JSON and SVG");
    eval->add_option("--pred", pred_dir, "Directory of predicted <id>.png masks")->required();
    eval->add_option("--truth", truth_dir, "Directory of reference <id>.png masks")->required();
    eval->add_option("--prob", prob_dir, "Directory of <id>.vprb probability maps (enables AUC)");
    eval->add_option("--output", output, "Output directory: report.json, report.svg")->required();
    add_common(eval, common, true);

    auto* assoc = app.add_subcommand("assoc", "Analysis CSV -> association CSV and forest plot");
    assoc->add_option("--input", input, "CSV with columns id,outcome,age,sex,<metrics...>")->required();
    assoc->add_option("--output", output, "Output directory: association.csv, forest.svg")->required();
    assoc->add_option("--title", title, "Forest plot title");
    add_common(assoc, common, false);

    auto* synth = app.add_subcommand("synth", "Tree spec JSON -> synthetic scene bundle");
    synth->add_option("--input", input, "Tree spec JSON ({} for defaults)")->required();
    synth->add_option("--output", output, "Output directory: image.png, mask.png, truth.json, spec.json")->required();
    synth->add_option("--seed", common.seed, "Overrides the spec's seed");

    auto* srv = app.add_subcommand("serve", "Serve the annotation HTTP API for a project directory");
    srv->add_option("--input", input, "Project directory")->required();
    srv->add_option("--create", project_id, "Create a new project with this id");
    srv->add_option("--images", images_dir, "Add every <id>.png in this directory before serving");
    srv->add_option("--truth", truth_dir, "Reference <id>.png masks for added images");
    srv->add_option("--host", host, "Bind address")->default_val("127.0.0.1");
    srv->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535))->default_val(8080);
    srv->add_option("--endpoint", common.endpoint, "External segmenter URL (new projects only)");
    add_common(srv, common, false);

    auto* loop = app.add_subcommand("loop-sim", "Simulated annotation rounds -> per-round report JSON");
    loop->add_option("--output", output, "Project directory to create; loop_sim.json is written inside")->required();
    loop->add_option("--rounds", common.rounds, "Rounds")->check(CLI::PositiveNumber);
    loop->add_option("--images-per-round", common.images_per_round, "Images per round")->check(CLI::PositiveNumber);
    loop->add_option("--size", common.size, "Image side in pixels")->check(CLI::PositiveNumber);
    loop->add_option("--fidelity", common.fidelity, "Simulated annotator fidelity")->check(CLI::Range(0.0, 1.0));
    add_common(loop, common, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*preseg) {
            Config cfg(common);
            make_dir(output);
            const auto prob = (fs::path(output) / "probability.vprb").string();
            const auto mask = (fs::path(output) / "mask.png").string();
            check(chv_preseg(cfg.get(), input.c_str(), prob.c_str(), mask.c_str()));
        } else if (*graph) {
            Config cfg(common);
            check(chv_graph(cfg.get(), input.c_str(), output.c_str()));
        } else if (*metrics) {
            Config cfg(common);
            Cstrs ids, paths;
            for (const auto& [id, p] : listing(input, ".png")) {
                ids.add(id);
                paths.add(p.string());
            }
            if (ids.keep.empty()) usage_error("no .png masks in " + input);
            check(chv_metrics(cfg.get(), ids.data(), paths.data(), ids.keep.size(), output.c_str()));
        } else if (*eval) {
            Config cfg(common);
            with_prob = !prob_dir.empty();
            const auto preds = listing(pred_dir, ".png");
            const auto truths = listing(truth_dir, ".png");
            std::map<std::string, fs::path> probs;
            if (with_prob) probs = listing(prob_dir, ".vprb");
            Cstrs ids, p, t, q;
            for (const auto& [id, path] : preds) {
                const auto it = truths.find(id);
                if (it == truths.end()) usage_error("no reference mask for '" + id + "' in " + truth_dir);
                ids.add(id);
                p.add(path.string());
                t.add(it->second.string());
                if (with_prob) {
                    const auto jt = probs.find(id);
                    if (jt == probs.end()) usage_error("no probability map for '" + id + "' in " + prob_dir);
                    q.add(jt->second.string());
                }
            }
            for (const auto& [id, path] : truths)
                if (!preds.count(id)) usage_error("no predicted mask for '" + id + "' in " + pred_dir);
            if (ids.keep.empty()) usage_error("no .png masks in " + pred_dir);
            make_dir(output);
            const auto rj = (fs::path(output) / "report.json").string();
            const auto rs = (fs::path(output) / "report.svg").string();
            check(chv_eval(cfg.get(), ids.data(), p.data(), t.data(), with_prob ? q.data() : nullptr, ids.keep.size(),
                           rj.c_str(), rs.c_str()));
        } else if (*assoc) {
            Config cfg(common);
            make_dir(output);
            const auto csv = (fs::path(output) / "association.csv").string();
            const auto svg = (fs::path(output) / "forest.svg").string();
            check(chv_assoc(cfg.get(), input.c_str(), title.c_str(), csv.c_str(), svg.c_str()));
        } else if (*synth) {
            const std::string spec = slurp(input);
            const std::uint64_t seed = common.seed;
            check(chv_synth(spec.c_str(), synth->count("--seed") ? &seed : nullptr, output.c_str()));
        } else if (*srv) {
            Config cfg(common);
            chv_project* project = nullptr;
            if (!project_id.empty()) check(chv_project_create(input.c_str(), project_id.c_str(), cfg.get(), &project));
            else check(chv_project_open(input.c_str(), &project));
            std::unique_ptr<chv_project, void (*)(chv_project*)> guard(project, chv_project_close);
            if (!images_dir.empty()) {
                for (const auto& [id, path] : listing(images_dir, ".png")) {
                    std::string truth;
                    if (!truth_dir.empty()) {
                        const auto tp = fs::path(truth_dir) / (id + ".png");
                        if (fs::exists(tp)) truth = tp.string();
                    }
                    check(chv_project_add_image(project, id.c_str(), path.string().c_str(), "", "standard",
                                                truth.empty() ? nullptr : truth.c_str()));
                }
            } else if (!truth_dir.empty()) {
                usage_error("--truth needs --images");
            }
            serve(project, host, port);
        } else if (*loop) {
            Config cfg(common);
            make_dir(output);
            const auto out = (fs::path(output) / "loop_sim.json").string();
            check(chv_loop_sim(cfg.get(), (fs::path(output) / "project").string().c_str(), out.c_str()));
            std::cout << slurp(out);
        }
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << "\n";
        return exit_code(f.code);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
