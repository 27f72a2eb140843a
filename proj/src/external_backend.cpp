#include <httplib.h>

#include "chorovessel/error.hpp"
#include "chorovessel/presegment.hpp"

namespace chorovessel {

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) input_error("external backend: endpoint must be an http:// URL");
    if (url.compare(0, scheme_end, "http") != 0)
        input_error("external backend: only http:// endpoints are supported");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/segment"};
    std::string path = url.substr(path_start);
    if (path == "/") path = "/segment";
    return {url.substr(0, path_start), path};
}

}  // namespace

ProbabilityGrid segment_external(const GrayImage& img, const ExternalEndpoint& endpoint) {
    const SplitUrl target = split_url(endpoint.url);
    httplib::Client client(target.base);
    client.set_connection_timeout(endpoint.timeout_s, 0);
    client.set_read_timeout(endpoint.timeout_s, 0);
    client.set_write_timeout(endpoint.timeout_s, 0);

    httplib::Headers headers;
    for (const auto& [name, value] : endpoint.headers) headers.emplace(name, value);

    const auto png = encode_png(img);
    auto res = client.Post(target.path, headers, reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
    if (!res)
        fail(ErrorKind::Backend, "external backend unreachable or timed out: " + httplib::to_string(res.error()));
    if (res->status != 200)
        fail(ErrorKind::Backend, "external backend returned HTTP " + std::to_string(res->status));

    ProbabilityGrid grid;
    try {
        grid = decode_probability(
            std::span(reinterpret_cast<const std::uint8_t*>(res->body.data()), res->body.size()));
    } catch (const Error& e) {
        fail(ErrorKind::Backend, std::string("external backend: bad probability payload: ") + e.what());
    }
    if (grid.width != img.width || grid.height != img.height)
        fail(ErrorKind::Backend, "external backend: dimension mismatch in returned grid (" +
                                     std::to_string(grid.width) + "x" + std::to_string(grid.height) + " vs " +
                                     std::to_string(img.width) + "x" + std::to_string(img.height) + ")");
    return grid;
}

}  // namespace chorovessel
