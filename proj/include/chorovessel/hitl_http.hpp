#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "chorovessel/hitl.hpp"

namespace chorovessel {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);  // throws Input on malformed text

struct HttpReply {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// The "hitl/1" API without a transport. JSON bodies carry "schema": "hitl/1";
/// errors come back as {"schema", "error": {"kind", "message"}} with 400, 404,
/// 409, 502 or 500.
HttpReply handle_request(Project& project, const std::string& method, const std::string& path,
                         const std::map<std::string, std::string>& query, const std::string& body);

class HitlServer {
public:
    explicit HitlServer(Project& project);
    ~HitlServer();
    HitlServer(const HitlServer&) = delete;
    HitlServer& operator=(const HitlServer&) = delete;

    /// port 0 picks a free port; returns the bound port or -1.
    int bind(const std::string& host, int port);
    void run();  // blocks until stop()
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace chorovessel
