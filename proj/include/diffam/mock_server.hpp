#pragma once

// Local face-compare service speaking the client protocol.

#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "diffam/encoders.hpp"

namespace httplib {
class Server;
}

namespace diffam::api {

struct ScriptedResponse {
    int status = 200;
    std::string body;
};

struct MockOptions {
    enum class Mode { fixed, cosine };
    Mode mode = Mode::fixed;
    double fixed_score = 73.5;
    /// cosine mode: confidence = 100 * clamp(cos(emb(a), emb(b)), 0, 1)
    std::shared_ptr<const FaceEmbedder> embedder;
    /// Served in order before falling back to the mode.
    std::vector<ScriptedResponse> script;
    /// When non-empty, requests must carry "Authorization: Bearer <key>".
    std::string api_key;
};

/// Confidence the cosine mode reports for a pair of decoded images.
double cosine_confidence(const FaceEmbedder& emb, const ImageBuffer& a, const ImageBuffer& b);

class MockCompareServer {
public:
    explicit MockCompareServer(MockOptions options);
    ~MockCompareServer();
    MockCompareServer(const MockCompareServer&) = delete;
    MockCompareServer& operator=(const MockCompareServer&) = delete;

    /// Binds to host:port (port 0 picks a free port) and serves in a thread.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Blocks serving on the calling thread.
    void serve(const std::string& host, int port);
    void stop();

    int port() const { return port_; }
    std::string endpoint() const;

    /// Arrival times (seconds on a steady clock) of every /compare request.
    std::vector<double> arrivals() const;
    std::size_t request_count() const;

private:
    void install_routes();

    MockOptions options_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
    std::string host_ = "127.0.0.1";
    mutable std::mutex mutex_;
    std::vector<double> arrivals_;
    std::size_t script_pos_ = 0;
};

}  // namespace diffam::api
