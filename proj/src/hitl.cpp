#include "chorovessel/hitl.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <random>
#include <set>

#include "chorovessel/error.hpp"
#include "chorovessel/evaluation.hpp"
#include "chorovessel/parallel.hpp"
#include "chorovessel/synth.hpp"

namespace chorovessel {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kMaxRadius = 512;

std::int64_t sq(std::int64_t v) { return v * v; }

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 128 || id[0] == '.') return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    return h;
}

}  // namespace

void validate_events(const std::vector<EditEvent>& events, int width, int height, std::int64_t after_seq) {
    std::int64_t prev = after_seq;
    for (const auto& ev : events) {
        const std::string at = "event seq " + std::to_string(ev.seq);
        if (ev.seq <= prev) input_error(at + ": seq must increase strictly");
        prev = ev.seq;
        if (ev.radius_px < 1 || ev.radius_px > kMaxRadius) input_error(at + ": radius_px must be in [1, 512]");
        if (ev.path.empty()) input_error(at + ": empty path");
        for (const auto& p : ev.path)
            if (p[0] < 0 || p[1] < 0 || p[0] >= width || p[1] >= height)
                input_error(at + ": point (" + std::to_string(p[0]) + "," + std::to_string(p[1]) + ") out of bounds");
    }
}

void stamp_stroke(Mask& mask, const EditEvent& ev) {
    const std::uint8_t value = ev.tool == EditTool::Add ? 1 : 0;
    const std::int64_t r = ev.radius_px, r2 = sq(r);
    auto segment = [&](std::array<int, 2> a, std::array<int, 2> b) {
        const int x0 = std::max(0, int(std::min(a[0], b[0]) - r)), x1 = std::min(mask.width - 1, int(std::max(a[0], b[0]) + r));
        const int y0 = std::max(0, int(std::min(a[1], b[1]) - r)), y1 = std::min(mask.height - 1, int(std::max(a[1], b[1]) + r));
        const std::int64_t dx = b[0] - a[0], dy = b[1] - a[1], len2 = dx * dx + dy * dy;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const std::int64_t px = x - a[0], py = y - a[1];
                const std::int64_t dot = px * dx + py * dy;
                bool inside;
                if (len2 == 0 || dot <= 0) {
                    inside = px * px + py * py < r2;
                } else if (dot >= len2) {
                    inside = sq(x - b[0]) + sq(y - b[1]) < r2;
                } else {
                    // perpendicular distance^2 = (|p|^2 len2 - dot^2) / len2
                    const __int128 lhs = __int128(px * px + py * py) * len2 - __int128(dot) * dot;
                    inside = lhs < __int128(r2) * len2;
                }
                if (inside) mask.at(x, y) = value;
            }
    };
    if (ev.path.size() == 1) segment(ev.path[0], ev.path[0]);
    for (std::size_t i = 1; i < ev.path.size(); ++i) segment(ev.path[i - 1], ev.path[i]);
}

Mask apply_events(const Mask& proposal, const std::vector<EditEvent>& events) {
    validate_events(events, proposal.width, proposal.height);
    Mask out = proposal;
    for (const auto& ev : events) stamp_stroke(out, ev);
    return out;
}

std::int64_t active_ms(const std::vector<EditEvent>& events, std::int64_t idle_cutoff_ms) {
    std::int64_t total = 0;
    for (std::size_t i = 1; i < events.size(); ++i)
        total += std::clamp<std::int64_t>(events[i].t_ms - events[i - 1].t_ms, 0, idle_cutoff_ms);
    return total;
}

std::vector<EditEvent> diff_to_events(const Mask& from, const Mask& to, std::int64_t first_seq, std::int64_t t0_ms,
                                      std::int64_t gap_ms) {
    if (from.width != to.width || from.height != to.height) input_error("diff_to_events: mask sizes differ");
    std::vector<EditEvent> out;
    for (int y = 0; y < from.height; ++y) {
        for (int x = 0; x < from.width;) {
            if (from.at(x, y) == to.at(x, y)) {
                ++x;
                continue;
            }
            const std::uint8_t v = to.at(x, y);
            int end = x;
            while (end + 1 < from.width && from.at(end + 1, y) != to.at(end + 1, y) && to.at(end + 1, y) == v) ++end;
            EditEvent ev;
            ev.seq = first_seq + std::int64_t(out.size());
            ev.t_ms = t0_ms + gap_ms * std::int64_t(out.size());
            ev.tool = v ? EditTool::Add : EditTool::Erase;
            ev.radius_px = 1;
            ev.path.push_back({x, y});
            if (end > x) ev.path.push_back({end, y});
            out.push_back(std::move(ev));
            x = end + 1;
        }
    }
    return out;
}

namespace {

ojson event_json(const EditEvent& ev) {
    ojson path = ojson::array();
    for (const auto& p : ev.path) path.push_back({p[0], p[1]});
    return {{"seq", ev.seq},
            {"t_ms", ev.t_ms},
            {"tool", ev.tool == EditTool::Add ? "add" : "erase"},
            {"radius_px", ev.radius_px},
            {"path", path}};
}

ojson events_json(const std::vector<EditEvent>& events) {
    ojson arr = ojson::array();
    for (const auto& ev : events) arr.push_back(event_json(ev));
    return arr;
}

template <class T>
T field(const ojson& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) input_error(where + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        input_error(where + ": bad type for '" + key + "'");
    }
}

EditEvent event_from(const ojson& j) {
    const std::string where = "event";
    EditEvent ev;
    ev.seq = field<std::int64_t>(j, "seq", where);
    ev.t_ms = field<std::int64_t>(j, "t_ms", where);
    const auto tool = field<std::string>(j, "tool", where);
    if (tool == "add") {
        ev.tool = EditTool::Add;
    } else if (tool == "erase") {
        ev.tool = EditTool::Erase;
    } else {
        input_error("event: tool must be 'add' or 'erase'");
    }
    ev.radius_px = field<int>(j, "radius_px", where);
    if (!j.contains("path") || !j.at("path").is_array()) input_error("event: path must be an array");
    const auto& path = j.at("path");
    for (const auto& p : path) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer())
            input_error("event: path points must be [x, y] integer pairs");
        ev.path.push_back({p[0].get<int>(), p[1].get<int>()});
    }
    return ev;
}

std::vector<EditEvent> events_from(const ojson& arr) {
    if (!arr.is_array()) input_error("events must be an array");
    std::vector<EditEvent> out;
    for (const auto& j : arr) out.push_back(event_from(j));
    return out;
}

ojson params_json(const VesselnessParams& p) {
    return {{"scales", p.scales}, {"beta", p.beta}, {"threshold", p.threshold}};
}

VesselnessParams params_from(const ojson& j) {
    VesselnessParams p;
    p.scales = field<std::vector<double>>(j, "scales", "params");
    p.beta = field<double>(j, "beta", "params");
    p.threshold = field<double>(j, "threshold", "params");
    p.validate();
    return p;
}

ojson backend_json(const SegmenterBackend& b) {
    if (const auto* p = std::get_if<VesselnessParams>(&b)) {
        ojson j = {{"kind", "builtin"}};
        j.update(params_json(*p));
        return j;
    }
    const auto& e = std::get<ExternalEndpoint>(b);
    ojson headers = ojson::array();
    for (const auto& [k, v] : e.headers) headers.push_back({k, v});
    return {{"kind", "external"}, {"url", e.url}, {"headers", headers}, {"threshold", e.threshold}, {"timeout_s", e.timeout_s}};
}

SegmenterBackend backend_from(const ojson& j) {
    const auto kind = field<std::string>(j, "kind", "backend");
    if (kind == "builtin") return params_from(j);
    if (kind != "external") input_error("backend: kind must be 'builtin' or 'external'");
    ExternalEndpoint e;
    e.url = field<std::string>(j, "url", "backend");
    if (j.contains("headers"))
        for (const auto& h : j.at("headers")) {
            if (!h.is_array() || h.size() != 2) input_error("backend: headers must be [name, value] pairs");
            e.headers.emplace_back(h[0].get<std::string>(), h[1].get<std::string>());
        }
    e.threshold = j.value("threshold", e.threshold);
    e.timeout_s = j.value("timeout_s", e.timeout_s);
    return e;
}

ojson report_json(const RoundReport& r) {
    return {{"mean_dice_proposal_vs_corrected", r.mean_dice_proposal_vs_corrected},
            {"mean_active_seconds", r.mean_active_seconds},
            {"mean_pixels_changed", r.mean_pixels_changed},
            {"converged", r.converged},
            {"fitted", r.fitted ? params_json(*r.fitted) : ojson(nullptr)},
            {"fit_mean_dice", r.fit_mean_dice},
            {"training_images", r.training_images}};
}

RoundReport report_from(const ojson& j) {
    RoundReport r;
    r.mean_dice_proposal_vs_corrected = field<double>(j, "mean_dice_proposal_vs_corrected", "report");
    r.mean_active_seconds = field<double>(j, "mean_active_seconds", "report");
    r.mean_pixels_changed = field<double>(j, "mean_pixels_changed", "report");
    r.converged = field<bool>(j, "converged", "report");
    if (!j.at("fitted").is_null()) r.fitted = params_from(j.at("fitted"));
    r.fit_mean_dice = field<double>(j, "fit_mean_dice", "report");
    r.training_images = field<int>(j, "training_images", "report");
    return r;
}

ImageStatus status_from(const std::string& s) {
    if (s == "proposed") return ImageStatus::Proposed;
    if (s == "in_progress") return ImageStatus::InProgress;
    if (s == "corrected") return ImageStatus::Corrected;
    input_error("unknown image status '" + s + "'");
}

ojson round_image_json(const RoundImage& im) {
    ojson j = {{"id", im.id},
               {"status", status_name(im.status)},
               {"revision", im.revision},
               {"event_count", im.events.size()}};
    if (im.status == ImageStatus::Corrected) {
        j["client_active_ms"] = im.client_active_ms;
        j["server_active_ms"] = im.server_active_ms;
        j["pixels_changed"] = im.pixels_changed;
        j["dice"] = im.dice;
    }
    return j;
}

ojson round_json(const RoundState& r) {
    ojson images = ojson::array();
    for (const auto& im : r.images) images.push_back(round_image_json(im));
    return {{"number", r.number},
            {"backend", backend_json(r.backend)},
            {"finalized", r.report.has_value()},
            {"images", images},
            {"report", r.report ? report_json(*r.report) : ojson(nullptr)}};
}

ojson state_json(const ProjectState& s) {
    ojson images = ojson::array();
    for (const auto& im : s.images)
        images.push_back({{"id", im.id}, {"cohort", im.cohort}, {"view", im.view}, {"has_truth", im.has_truth}});
    ojson rounds = ojson::array();
    for (const auto& r : s.rounds) rounds.push_back(round_json(r));
    return {{"schema", "hitl/1"},
            {"id", s.id},
            {"config",
             {{"stop_dice", s.config.stop_dice},
              {"idle_cutoff_ms", s.config.idle_cutoff_ms},
              {"threads", s.config.threads}}},
            {"backend", backend_json(s.backend)},
            {"images", images},
            {"rounds", rounds}};
}

fs::path events_path(const fs::path& dir, int round, const std::string& id) {
    return dir / "rounds" / std::to_string(round) / "events" / (id + ".json");
}

ProjectState state_from(const ojson& j, const fs::path& dir) {
    if (j.value("schema", "") != "hitl/1") input_error("project.json: schema must be hitl/1");
    ProjectState s;
    s.id = field<std::string>(j, "id", "project");
    const auto& c = j.at("config");
    s.config.stop_dice = field<double>(c, "stop_dice", "config");
    s.config.idle_cutoff_ms = field<std::int64_t>(c, "idle_cutoff_ms", "config");
    s.config.threads = field<int>(c, "threads", "config");
    s.backend = backend_from(j.at("backend"));
    for (const auto& im : j.at("images"))
        s.images.push_back({field<std::string>(im, "id", "image"), field<std::string>(im, "cohort", "image"),
                            field<std::string>(im, "view", "image"), field<bool>(im, "has_truth", "image")});
    for (const auto& rj : j.at("rounds")) {
        RoundState r;
        r.number = field<int>(rj, "number", "round");
        r.backend = backend_from(rj.at("backend"));
        for (const auto& ij : rj.at("images")) {
            RoundImage im;
            im.id = field<std::string>(ij, "id", "round image");
            im.status = status_from(field<std::string>(ij, "status", "round image"));
            im.revision = field<std::int64_t>(ij, "revision", "round image");
            const auto count = field<std::size_t>(ij, "event_count", "round image");
            if (count > 0) {
                auto events = events_from_json(std::string(
                    [&] {
                        const auto bytes = read_file_bytes(events_path(dir, r.number, im.id));
                        return std::string(bytes.begin(), bytes.end());
                    }()));
                // events written ahead of an interrupted commit are not part of the state
                if (events.size() < count) fail(ErrorKind::Internal, "events log for '" + im.id + "' is shorter than committed");
                events.resize(count);
                im.events = std::move(events);
            }
            if (im.status == ImageStatus::Corrected) {
                im.client_active_ms = field<std::int64_t>(ij, "client_active_ms", "round image");
                im.server_active_ms = field<std::int64_t>(ij, "server_active_ms", "round image");
                im.pixels_changed = field<std::int64_t>(ij, "pixels_changed", "round image");
                im.dice = field<double>(ij, "dice", "round image");
            }
            r.images.push_back(std::move(im));
        }
        if (!rj.at("report").is_null()) r.report = report_from(rj.at("report"));
        s.rounds.push_back(std::move(r));
    }
    return s;
}

}  // namespace

std::string events_to_json(const std::vector<EditEvent>& events) { return events_json(events).dump(); }

std::vector<EditEvent> events_from_json(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        input_error(std::string("events: invalid JSON: ") + e.what());
    }
    return events_from(j);
}

std::string backend_to_json(const SegmenterBackend& backend) { return backend_json(backend).dump(); }

SegmenterBackend backend_from_json(const std::string& text) {
    try {
        return backend_from(ojson::parse(text));
    } catch (const nlohmann::json::exception& e) {
        input_error(std::string("backend: ") + e.what());
    }
}

std::string project_state_to_json(const ProjectState& state) { return state_json(state).dump(2) + "\n"; }
std::string round_to_json(const RoundState& round) { return round_json(round).dump(); }

std::string report_to_json(const RoundReport& report, int round_number) {
    ojson j = {{"schema", "hitl/1"}, {"round", round_number}};
    j.update(report_json(report));
    return j.dump(2) + "\n";
}

const char* status_name(ImageStatus s) {
    switch (s) {
        case ImageStatus::Proposed: return "proposed";
        case ImageStatus::InProgress: return "in_progress";
        case ImageStatus::Corrected: return "corrected";
    }
    return "?";
}

const RoundImage* RoundState::find(const std::string& id) const {
    for (const auto& im : images)
        if (im.id == id) return &im;
    return nullptr;
}

const ImageRecord* ProjectState::image(const std::string& id) const {
    for (const auto& im : images)
        if (im.id == id) return &im;
    return nullptr;
}

const RoundState* ProjectState::round_of(const std::string& image_id) const {
    for (const auto& r : rounds)
        if (r.find(image_id)) return &r;
    return nullptr;
}

const RoundState* ProjectState::round(int number) const {
    if (number < 1 || number > int(rounds.size())) return nullptr;
    return &rounds[std::size_t(number - 1)];
}

Project::Project(fs::path dir, ProjectState state)
    : dir_(std::move(dir)), state_(std::make_shared<const ProjectState>(std::move(state))) {}

std::unique_ptr<Project> Project::create(const fs::path& dir, const std::string& id, const SegmenterBackend& backend,
                                         const HitlConfig& config) {
    if (!valid_id(id)) input_error("project id '" + id + "' must be [A-Za-z0-9._-]");
    if (fs::exists(dir / "project.json")) fail(ErrorKind::Conflict, "a project already exists in " + dir.string());
    if (const auto* p = std::get_if<VesselnessParams>(&backend)) p->validate();
    if (!(config.stop_dice >= 0.0 && config.stop_dice <= 1.0)) input_error("stop_dice must be in [0,1]");
    if (config.idle_cutoff_ms < 0) input_error("idle_cutoff_ms must be >= 0");
    fs::create_directories(dir);
    ProjectState s;
    s.id = id;
    s.config = config;
    s.backend = backend;
    std::unique_ptr<Project> p(new Project(dir, s));
    write_text_atomic(dir / "project.json", project_state_to_json(s));
    return p;
}

std::unique_ptr<Project> Project::open(const fs::path& dir) {
    const auto path = dir / "project.json";
    if (!fs::exists(path)) fail(ErrorKind::NotFound, "no project.json in " + dir.string());
    const auto bytes = read_file_bytes(path);
    ojson j;
    try {
        j = ojson::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        input_error(std::string("project.json: ") + e.what());
    }
    return std::unique_ptr<Project>(new Project(dir, state_from(j, dir)));
}

std::shared_ptr<const ProjectState> Project::snapshot() const {
    std::lock_guard lk(snap_mu_);
    return state_;
}

void Project::commit(ProjectState next) {
    write_text_atomic(dir_ / "project.json", project_state_to_json(next));
    auto ptr = std::make_shared<const ProjectState>(std::move(next));
    std::lock_guard lk(snap_mu_);
    state_ = std::move(ptr);
}

fs::path Project::round_dir(int number) const { return dir_ / "rounds" / std::to_string(number); }

RoundState& Project::open_round(ProjectState& s, const std::string& image_id) const {
    if (!s.image(image_id)) fail(ErrorKind::NotFound, "unknown image '" + image_id + "'");
    if (s.rounds.empty() || s.rounds.back().report || !s.rounds.back().find(image_id))
        fail(ErrorKind::Conflict, "image '" + image_id + "' is not in the open round");
    return s.rounds.back();
}

void Project::add_image(const std::string& id, const GrayImage& image, const std::string& cohort, const std::string& view,
                        const Mask* truth) {
    if (!valid_id(id)) input_error("image id '" + id + "' must be [A-Za-z0-9._-]");
    if (view != "standard" && view != "ultrawide") input_error("view must be 'standard' or 'ultrawide'");
    if (image.width < 3 || image.height < 3) input_error("image '" + id + "' is smaller than 3x3");
    if (truth && (truth->width != image.width || truth->height != image.height))
        input_error("truth mask for '" + id + "' does not match the image size");
    std::lock_guard lk(write_mu_);
    ProjectState next = *snapshot();
    if (next.image(id)) fail(ErrorKind::Conflict, "image '" + id + "' is already registered");
    write_image(image, dir_ / "images" / (id + ".png"));
    if (truth) write_mask(*truth, dir_ / "truth" / (id + ".png"));
    next.images.push_back({id, cohort, view, truth != nullptr});
    commit(std::move(next));
}

RoundState Project::start_round(const std::vector<std::string>& image_ids) {
    if (image_ids.empty()) input_error("start_round: no images given");
    std::lock_guard lk(write_mu_);
    ProjectState next = *snapshot();
    if (!next.rounds.empty() && !next.rounds.back().report)
        fail(ErrorKind::Conflict, "round " + std::to_string(next.rounds.back().number) + " is not finalized");
    std::set<std::string> seen;
    for (const auto& id : image_ids) {
        if (!next.image(id)) fail(ErrorKind::NotFound, "unknown image '" + id + "'");
        if (!seen.insert(id).second) input_error("image '" + id + "' listed twice");
        if (const auto* r = next.round_of(id))
            fail(ErrorKind::Conflict, "image '" + id + "' already assigned to round " + std::to_string(r->number));
    }
    RoundState round;
    round.number = int(next.rounds.size()) + 1;
    round.backend = next.backend;
    const auto dir = round_dir(round.number);
    std::vector<Mask> proposals(image_ids.size());
    parallel_for(image_ids.size(), next.config.threads, [&](std::size_t i) {
        proposals[i] = propose(read_image(dir_ / "images" / (image_ids[i] + ".png")), round.backend).mask;
    });
    for (std::size_t i = 0; i < image_ids.size(); ++i) {
        write_mask(proposals[i], dir / "proposals" / (image_ids[i] + ".png"));
        RoundImage im;
        im.id = image_ids[i];
        round.images.push_back(im);
    }
    next.rounds.push_back(round);
    commit(std::move(next));
    return round;
}

std::int64_t Project::append_events(const std::string& image_id, const std::vector<EditEvent>& events,
                                    std::int64_t expected_revision) {
    std::lock_guard lk(write_mu_);
    ProjectState next = *snapshot();
    RoundState& round = open_round(next, image_id);
    auto& im = *std::find_if(round.images.begin(), round.images.end(), [&](const auto& x) { return x.id == image_id; });
    if (im.status == ImageStatus::Corrected) fail(ErrorKind::Conflict, "image '" + image_id + "' is already corrected");
    if (expected_revision != im.revision)
        fail(ErrorKind::Conflict, "stale revision " + std::to_string(expected_revision) + " for '" + image_id +
                                      "' (current " + std::to_string(im.revision) + ")");
    if (events.empty()) input_error("append_events: no events");
    const Mask prop = proposal(image_id);
    validate_events(events, prop.width, prop.height,
                    im.events.empty() ? std::numeric_limits<std::int64_t>::min() : im.events.back().seq);
    im.events.insert(im.events.end(), events.begin(), events.end());
    im.status = ImageStatus::InProgress;
    ++im.revision;
    write_text_atomic(events_path(dir_, round.number, image_id), events_to_json(im.events));
    const auto rev = im.revision;
    commit(std::move(next));
    return rev;
}

RoundImage Project::submit_correction(const std::string& image_id, const Mask& final_mask, std::int64_t client_active_ms,
                                      std::int64_t expected_revision) {
    if (client_active_ms < 0) input_error("active_ms must be >= 0");
    std::lock_guard lk(write_mu_);
    ProjectState next = *snapshot();
    RoundState& round = open_round(next, image_id);
    auto& im = *std::find_if(round.images.begin(), round.images.end(), [&](const auto& x) { return x.id == image_id; });
    if (im.status == ImageStatus::Corrected) fail(ErrorKind::Conflict, "image '" + image_id + "' is already corrected");
    if (expected_revision != im.revision)
        fail(ErrorKind::Conflict, "stale revision " + std::to_string(expected_revision) + " for '" + image_id +
                                      "' (current " + std::to_string(im.revision) + ")");
    const Mask prop = proposal(image_id);
    if (final_mask.width != prop.width || final_mask.height != prop.height)
        input_error("final mask size does not match the proposal");
    if (apply_events(prop, im.events) != final_mask) input_error("replay mismatch: final mask differs from the replayed edit log");
    write_mask(final_mask, round_dir(round.number) / "corrections" / (image_id + ".png"));
    im.status = ImageStatus::Corrected;
    ++im.revision;
    im.client_active_ms = client_active_ms;
    im.server_active_ms = active_ms(im.events, next.config.idle_cutoff_ms);
    const auto c = confusion(final_mask, prop);
    im.pixels_changed = std::int64_t(c.fp + c.fn);
    im.dice = c.dice();
    const RoundImage out = im;
    commit(std::move(next));
    return out;
}

RoundReport Project::finalize_round(int number) {
    std::lock_guard lk(write_mu_);
    ProjectState next = *snapshot();
    if (number < 1 || number > int(next.rounds.size())) fail(ErrorKind::NotFound, "no round " + std::to_string(number));
    RoundState& round = next.rounds[std::size_t(number - 1)];
    if (round.report) fail(ErrorKind::Conflict, "round " + std::to_string(number) + " is already finalized");
    const auto open = std::count_if(round.images.begin(), round.images.end(),
                                    [](const auto& im) { return im.status != ImageStatus::Corrected; });
    if (open > 0)
        fail(ErrorKind::Conflict, "round " + std::to_string(number) + " is incomplete: " + std::to_string(open) +
                                      " image(s) not corrected");
    RoundReport rep;
    for (const auto& im : round.images) {
        rep.mean_dice_proposal_vs_corrected += im.dice;
        rep.mean_active_seconds += double(im.server_active_ms) / 1000.0;
        rep.mean_pixels_changed += double(im.pixels_changed);
    }
    const double n = double(round.images.size());
    rep.mean_dice_proposal_vs_corrected /= n;
    rep.mean_active_seconds /= n;
    rep.mean_pixels_changed /= n;
    rep.converged = rep.mean_dice_proposal_vs_corrected >= next.config.stop_dice;

    if (std::holds_alternative<VesselnessParams>(next.backend)) {
        // cumulative: every correction from round 1 through this one
        std::vector<GrayImage> images;
        std::vector<Mask> corrected;
        for (int r = 1; r <= number; ++r)
            for (const auto& im : next.rounds[std::size_t(r - 1)].images) {
                images.push_back(read_image(dir_ / "images" / (im.id + ".png")));
                corrected.push_back(read_mask(round_dir(r) / "corrections" / (im.id + ".png")));
            }
        std::vector<CorrectionPair> pairs;
        for (std::size_t i = 0; i < images.size(); ++i) pairs.push_back({&images[i], &corrected[i]});
        const auto fit = fit_on_corrections(pairs, FitGrid{}, next.config.threads);
        rep.fitted = fit.params;
        rep.fit_mean_dice = fit.mean_dice;
        rep.training_images = int(pairs.size());
        next.backend = fit.params;
    }
    round.report = rep;
    write_text_atomic(round_dir(number) / "report.json", report_to_json(rep, number));
    commit(std::move(next));
    return rep;
}

void Project::simulate_annotator(double fidelity, std::uint64_t seed) {
    if (!(fidelity >= 0.0 && fidelity <= 1.0)) input_error("fidelity must be in [0,1]");
    const auto s = snapshot();
    if (s->rounds.empty() || s->rounds.back().report) fail(ErrorKind::Conflict, "no open round to annotate");
    for (const auto& im : s->rounds.back().images)
        if (!s->image(im.id)->has_truth) input_error("missing ground truth for image '" + im.id + "'");
    for (const auto& im : s->rounds.back().images) {
        if (im.status == ImageStatus::Corrected) continue;
        const Mask base = apply_events(proposal(im.id), im.events);
        const Mask gt = truth(im.id);
        std::seed_seq ss{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(fnv1a(im.id)),
                         std::uint32_t(fnv1a(im.id) >> 32)};
        std::mt19937_64 rng(ss);
        std::uniform_real_distribution<double> unit;
        Mask target = base;
        for (std::size_t i = 0; i < target.bits.size(); ++i)
            if (base.bits[i] != gt.bits[i] && unit(rng) < fidelity) target.bits[i] = gt.bits[i];
        const std::int64_t first = im.events.empty() ? 1 : im.events.back().seq + 1;
        const std::int64_t t0 = im.events.empty() ? 0 : im.events.back().t_ms + 1000;
        const std::int64_t gap = 400 + std::int64_t(rng() % 2100);
        const auto events = diff_to_events(base, target, first, t0, gap);
        std::int64_t rev = im.revision;
        if (!events.empty()) rev = append_events(im.id, events, rev);
        std::vector<EditEvent> all = im.events;
        all.insert(all.end(), events.begin(), events.end());
        submit_correction(im.id, target, active_ms(all, s->config.idle_cutoff_ms), rev);
    }
}

GrayImage Project::image(const std::string& id) const {
    if (!snapshot()->image(id)) fail(ErrorKind::NotFound, "unknown image '" + id + "'");
    return read_image(dir_ / "images" / (id + ".png"));
}

Mask Project::proposal(const std::string& id) const {
    const auto s = snapshot();
    if (!s->image(id)) fail(ErrorKind::NotFound, "unknown image '" + id + "'");
    const auto* r = s->round_of(id);
    if (!r) fail(ErrorKind::NotFound, "image '" + id + "' has no proposal yet");
    return read_mask(round_dir(r->number) / "proposals" / (id + ".png"));
}

Mask Project::correction(const std::string& id) const {
    const auto s = snapshot();
    const auto* r = s->round_of(id);
    if (!r || r->find(id)->status != ImageStatus::Corrected) fail(ErrorKind::NotFound, "image '" + id + "' has no correction");
    return read_mask(round_dir(r->number) / "corrections" / (id + ".png"));
}

Mask Project::truth(const std::string& id) const {
    const auto s = snapshot();
    const auto* rec = s->image(id);
    if (!rec) fail(ErrorKind::NotFound, "unknown image '" + id + "'");
    if (!rec->has_truth) fail(ErrorKind::NotFound, "image '" + id + "' has no ground truth");
    return read_mask(dir_ / "truth" / (id + ".png"));
}

namespace {

TreeSpec loop_scene_spec(std::uint64_t seed, int size) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u;
    TreeSpec t;
    t.width = t.height = size;
    t.seed = seed;
    t.root_x = std::max(0.06 * size, 16.0);
    t.root_y = size * (0.4 + 0.2 * u(rng));
    t.root_heading_deg = -10.0 + 20.0 * u(rng);
    t.generations = 3;
    t.length_min = 0.22 * size;
    t.length_max = 0.32 * size;
    t.child_angles_deg = {30.0 + 20.0 * u(rng), -(30.0 + 20.0 * u(rng))};
    t.root_width = 4.0 + 6.0 * u(rng);
    t.taper = 0.75;
    t.wiggle_amplitude = 4.0 * u(rng);
    t.wiggle_period = 50.0;
    return t;
}

}  // namespace

LoopSimResult run_loop_sim(const LoopSimSpec& spec, const fs::path& dir) {
    if (spec.rounds < 1 || spec.images_per_round < 1) input_error("loop-sim: rounds and images_per_round must be >= 1");
    if (spec.size < 64) input_error("loop-sim: size must be >= 64");
    HitlConfig cfg;
    cfg.threads = spec.threads;
    auto project = Project::create(dir, "loop-sim", VesselnessParams{}, cfg);
    std::mt19937_64 seeds(spec.seed);
    LoopSimResult res;
    for (int r = 1; r <= spec.rounds; ++r) {
        std::vector<std::string> ids;
        for (int k = 0; k < spec.images_per_round; ++k) {
            const Scene scene = generate(loop_scene_spec(seeds(), spec.size));
            ids.push_back("r" + std::to_string(r) + "_" + std::to_string(k + 1));
            project->add_image(ids.back(), scene.image, "synthetic", "standard", &scene.mask);
        }
        project->start_round(ids);
        project->simulate_annotator(spec.fidelity, seeds());
        res.reports.push_back(project->finalize_round(r));
    }
    for (std::size_t i = 1; i < res.reports.size(); ++i) {
        const auto& a = res.reports[i - 1];
        const auto& b = res.reports[i];
        if (b.mean_dice_proposal_vs_corrected < a.mean_dice_proposal_vs_corrected) res.dice_non_decreasing = false;
        if (!(b.mean_pixels_changed < a.mean_pixels_changed)) res.effort_strictly_decreasing = false;
    }
    return res;
}

std::string LoopSimResult::to_json() const {
    ojson rounds = ojson::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        ojson j = {{"round", i + 1}};
        j.update(report_json(reports[i]));
        rounds.push_back(j);
    }
    return ojson{{"schema", "hitl/1"},
                 {"rounds", rounds},
                 {"dice_non_decreasing", dice_non_decreasing},
                 {"effort_strictly_decreasing", effort_strictly_decreasing}}
               .dump(2) +
           "\n";
}

}  // namespace chorovessel
