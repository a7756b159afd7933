#include "diffam/mock_server.hpp"

#include <algorithm>
#include <chrono>

#include "httplib.h"
#include "json.hpp"

#include "diffam/image_io.hpp"
#include "diffam/losses.hpp"

namespace diffam::api {

namespace {

double now_seconds()
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void reply(httplib::Response& res, int status, const nlohmann::json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

double cosine_confidence(const FaceEmbedder& emb, const ImageBuffer& a, const ImageBuffer& b)
{
    const double c = cosine_similarity(face_embed(emb, a), face_embed(emb, b));
    return 100.0 * std::clamp(c, 0.0, 1.0);
}

MockCompareServer::MockCompareServer(MockOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>())
{
    if (options_.mode == MockOptions::Mode::cosine && !options_.embedder)
        throw std::invalid_argument("mock server: cosine mode needs an embedder");
    install_routes();
}

MockCompareServer::~MockCompareServer() { stop(); }

void MockCompareServer::install_routes()
{
    server_->Post("/compare", [this](const httplib::Request& req, httplib::Response& res) {
        ScriptedResponse scripted;
        bool use_script = false;
        {
            std::lock_guard lock(mutex_);
            arrivals_.push_back(now_seconds());
            if (script_pos_ < options_.script.size()) {
                scripted = options_.script[script_pos_++];
                use_script = true;
            }
        }
        if (!options_.api_key.empty() && req.get_header_value("Authorization") != "Bearer " + options_.api_key) {
            reply(res, 401, {{"error", "invalid credentials"}});
            return;
        }
        if (use_script) {
            res.status = scripted.status;
            res.set_content(scripted.body, "application/json");
            return;
        }
        if (!req.has_file("image_a") || !req.has_file("image_b")) {
            reply(res, 400, {{"error", "expected multipart fields image_a and image_b"}});
            return;
        }
        if (options_.mode == MockOptions::Mode::fixed) {
            reply(res, 200, {{"confidence", options_.fixed_score}});
            return;
        }
        try {
            const auto& fa = req.get_file_value("image_a").content;
            const auto& fb = req.get_file_value("image_b").content;
            const ImageBuffer a = decode_png({reinterpret_cast<const std::uint8_t*>(fa.data()), fa.size()});
            const ImageBuffer b = decode_png({reinterpret_cast<const std::uint8_t*>(fb.data()), fb.size()});
            reply(res, 200, {{"confidence", cosine_confidence(*options_.embedder, a, b)}});
        } catch (const std::exception& e) {
            reply(res, 400, {{"error", e.what()}});
        }
    });
}

int MockCompareServer::start(const std::string& host, int port)
{
    host_ = host;
    if (port == 0)
        port_ = server_->bind_to_any_port(host);
    else
        port_ = server_->bind_to_port(host, port) ? port : -1;
    if (port_ <= 0)
        throw std::runtime_error("mock server: cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void MockCompareServer::serve(const std::string& host, int port)
{
    host_ = host;
    port_ = port;
    if (!server_->listen(host, port))
        throw std::runtime_error("mock server: cannot listen on " + host + ":" + std::to_string(port));
}

void MockCompareServer::stop()
{
    if (server_)
        server_->stop();
    if (thread_.joinable())
        thread_.join();
}

std::string MockCompareServer::endpoint() const { return "http://" + host_ + ":" + std::to_string(port_); }

std::vector<double> MockCompareServer::arrivals() const
{
    std::lock_guard lock(mutex_);
    return arrivals_;
}

std::size_t MockCompareServer::request_count() const
{
    std::lock_guard lock(mutex_);
    return arrivals_.size();
}

}  // namespace diffam::api
