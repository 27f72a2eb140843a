#include "chorovessel/hitl_http.hpp"

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>
#include <regex>

#include "chorovessel/error.hpp"

namespace chorovessel {

using ojson = nlohmann::ordered_json;

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), int(bytes.size()));
    out.resize(std::size_t(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::string clean;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) clean += c;
    if (clean.size() % 4 != 0) input_error("base64: length is not a multiple of 4");
    std::vector<std::uint8_t> out(clean.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()), int(clean.size()));
    if (n < 0) input_error("base64: invalid characters");
    std::size_t pad = 0;
    for (auto it = clean.rbegin(); it != clean.rend() && *it == '=' && pad < 2; ++it) ++pad;
    out.resize(std::size_t(n) - pad);
    return out;
}

namespace {

int http_status(ErrorKind k) {
    switch (k) {
        case ErrorKind::Input: return 400;
        case ErrorKind::NotFound: return 404;
        case ErrorKind::Conflict: return 409;
        case ErrorKind::Backend: return 502;
        case ErrorKind::Internal: return 500;
    }
    return 500;
}

const char* kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::Input: return "input";
        case ErrorKind::NotFound: return "not_found";
        case ErrorKind::Conflict: return "conflict";
        case ErrorKind::Backend: return "backend";
        case ErrorKind::Internal: return "internal";
    }
    return "internal";
}

HttpReply json_reply(ojson body, int status = 200) {
    ojson out = {{"schema", "hitl/1"}};
    for (auto& [k, v] : body.items())
        if (k != "schema") out[k] = v;
    return {status, "application/json", out.dump()};
}

HttpReply error_reply(ErrorKind kind, const std::string& message) {
    return json_reply({{"error", {{"kind", kind_name(kind)}, {"message", message}}}}, http_status(kind));
}

HttpReply png_reply(const std::vector<std::uint8_t>& bytes) {
    return {200, "image/png", std::string(bytes.begin(), bytes.end())};
}

ojson parse_body(const std::string& body) {
    try {
        auto j = ojson::parse(body);
        if (!j.is_object()) input_error("request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        input_error(std::string("request body is not JSON: ") + e.what());
    }
}

std::int64_t revision_of(const ojson& j) {
    if (!j.contains("revision") || !j["revision"].is_number_integer()) input_error("'revision' (integer) is required");
    return j["revision"].get<std::int64_t>();
}

ojson project_summary(const ProjectState& s) {
    ojson images = ojson::array();
    for (const auto& im : s.images) {
        ojson j = {{"id", im.id}, {"cohort", im.cohort}, {"view", im.view}, {"has_truth", im.has_truth}};
        if (const auto* r = s.round_of(im.id)) {
            j["round"] = r->number;
            j["status"] = status_name(r->find(im.id)->status);
        } else {
            j["round"] = nullptr;
            j["status"] = nullptr;
        }
        images.push_back(j);
    }
    ojson rounds = ojson::array();
    for (const auto& r : s.rounds)
        rounds.push_back({{"number", r.number},
                          {"images", r.images.size()},
                          {"finalized", r.report.has_value()},
                          {"converged", r.report ? r.report->converged : false}});
    const bool open = !s.rounds.empty() && !s.rounds.back().report;
    return {{"id", s.id},
            {"backend", ojson::parse(backend_to_json(s.backend))},
            {"config",
             {{"stop_dice", s.config.stop_dice}, {"idle_cutoff_ms", s.config.idle_cutoff_ms}, {"threads", s.config.threads}}},
            {"open_round", open ? ojson(s.rounds.back().number) : ojson(nullptr)},
            {"images", images},
            {"rounds", rounds}};
}

int round_number(const std::string& text) {
    try {
        std::size_t used = 0;
        const int n = std::stoi(text, &used);
        if (used == text.size()) return n;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::NotFound, "no round '" + text + "'");
}

HttpReply route(Project& p, const std::string& method, const std::string& path,
                const std::map<std::string, std::string>& query, const std::string& body) {
    static const std::regex image_re(R"(^/api/images/([^/]+)/(base|proposal|events|correction)$)");
    static const std::regex round_re(R"(^/api/rounds/([^/]+)(/finalize|/report)?$)");
    std::smatch m;

    if (path == "/api/project") {
        if (method != "GET") fail(ErrorKind::Input, "method not allowed");
        return json_reply(project_summary(*p.snapshot()));
    }
    if (path == "/api/rounds" && method == "POST") {
        const auto j = parse_body(body);
        if (!j.contains("image_ids") || !j["image_ids"].is_array()) input_error("'image_ids' (array) is required");
        const auto round = p.start_round(j["image_ids"].get<std::vector<std::string>>());
        return json_reply(ojson::parse(round_to_json(round)), 201);
    }
    if (std::regex_match(path, m, image_re)) {
        const std::string id = m[1], what = m[2];
        if (what == "base" && method == "GET") {
            const auto mode = query.count("mode") ? query.at("mode") : std::string("raw");
            if (mode != "raw" && mode != "enhanced") input_error("mode must be raw or enhanced");
            const auto img = p.image(id);
            return png_reply(encode_png(mode == "raw" ? img : enhance_contrast(img)));
        }
        if (what == "proposal" && method == "GET") return png_reply(encode_mask_png(p.proposal(id)));
        if (what == "events" && method == "GET") {
            const auto s = p.snapshot();
            if (!s->image(id)) fail(ErrorKind::NotFound, "unknown image '" + id + "'");
            const auto* r = s->round_of(id);
            if (!r) fail(ErrorKind::NotFound, "image '" + id + "' is not in any round");
            const auto* im = r->find(id);
            return json_reply({{"image", id},
                               {"round", r->number},
                               {"status", status_name(im->status)},
                               {"revision", im->revision},
                               {"events", ojson::parse(events_to_json(im->events))}});
        }
        if (what == "events" && method == "POST") {
            const auto j = parse_body(body);
            const auto rev = revision_of(j);
            if (!j.contains("events")) input_error("'events' is required");
            const auto events = events_from_json(j["events"].dump());
            const auto next = p.append_events(id, events, rev);
            const auto s = p.snapshot();
            return json_reply({{"image", id}, {"revision", next}, {"event_count", s->round_of(id)->find(id)->events.size()}});
        }
        if (what == "correction" && method == "PUT") {
            const auto j = parse_body(body);
            const auto rev = revision_of(j);
            if (!j.contains("final_mask_png_base64") || !j["final_mask_png_base64"].is_string())
                input_error("'final_mask_png_base64' (string) is required");
            if (!j.contains("active_ms") || !j["active_ms"].is_number_integer()) input_error("'active_ms' (integer) is required");
            const auto png = base64_decode(j["final_mask_png_base64"].get<std::string>());
            const auto im = p.submit_correction(id, decode_mask_png(png), j["active_ms"].get<std::int64_t>(), rev);
            return json_reply({{"image", id},
                               {"status", status_name(im.status)},
                               {"revision", im.revision},
                               {"client_active_ms", im.client_active_ms},
                               {"server_active_ms", im.server_active_ms},
                               {"pixels_changed", im.pixels_changed},
                               {"dice", im.dice}});
        }
        fail(ErrorKind::Input, "method not allowed");
    }
    if (std::regex_match(path, m, round_re)) {
        const int n = round_number(m[1]);
        const std::string tail = m[2];
        if (tail.empty() && method == "GET") {
            const auto s = p.snapshot();
            const auto* r = s->round(n);
            if (!r) fail(ErrorKind::NotFound, "no round " + std::to_string(n));
            return json_reply(ojson::parse(round_to_json(*r)));
        }
        if (tail == "/finalize" && method == "POST") {
            const auto rep = p.finalize_round(n);
            return json_reply(ojson::parse(report_to_json(rep, n)));
        }
        if (tail == "/report" && method == "GET") {
            const auto s = p.snapshot();
            const auto* r = s->round(n);
            if (!r) fail(ErrorKind::NotFound, "no round " + std::to_string(n));
            if (!r->report) fail(ErrorKind::NotFound, "round " + std::to_string(n) + " is not finalized");
            return json_reply(ojson::parse(report_to_json(*r->report, n)));
        }
        fail(ErrorKind::Input, "method not allowed");
    }
    fail(ErrorKind::NotFound, "no route for " + method + " " + path);
}

}  // namespace

HttpReply handle_request(Project& project, const std::string& method, const std::string& path,
                         const std::map<std::string, std::string>& query, const std::string& body) {
    try {
        return route(project, method, path, query, body);
    } catch (const Error& e) {
        return error_reply(e.kind(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return error_reply(ErrorKind::Input, e.what());
    } catch (const std::exception& e) {
        return error_reply(ErrorKind::Internal, e.what());
    }
}

struct HitlServer::Impl {
    Project& project;
    httplib::Server server;
};

HitlServer::HitlServer(Project& project) : impl_(new Impl{project, {}}) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) query.emplace(k, v);
        const auto reply = handle_request(impl_->project, req.method, req.path, query, req.body);
        res.status = reply.status;
        res.set_header("X-Hitl-Schema", "hitl/1");
        res.set_content(reply.body, reply.content_type);
    };
    impl_->server.Get(R"(/api/.*)", forward);
    impl_->server.Post(R"(/api/.*)", forward);
    impl_->server.Put(R"(/api/.*)", forward);
}

HitlServer::~HitlServer() { stop(); }

int HitlServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HitlServer::run() { impl_->server.listen_after_bind(); }

void HitlServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace chorovessel
