#pragma once

// Client for remote face-compare services (POST <endpoint>/compare with
// multipart PNG fields image_a / image_b, JSON reply {"confidence": x}).

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffam/types.hpp"

namespace diffam::api {

struct CompareResult {
    double confidence = 0.0;  // [0, 100]
    double latency_ms = 0.0;
    std::string provider;
    int attempts = 1;
};

class ApiError : public std::runtime_error {
public:
    enum class Kind { auth, malformed, out_of_range, exhausted, request };

    ApiError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

const char* to_string(ApiError::Kind kind);

struct RetryPolicy {
    double base_delay = 0.5;  // seconds before the first retry
    double factor = 2.0;
    int max_retries = 3;

    double delay(int retry) const;  // zero-based retry index
};

/// Spaces request starts at least 1/rate seconds apart across all callers.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second);

    void acquire();
    double rate() const { return rate_; }

private:
    using Clock = std::chrono::steady_clock;
    double rate_;
    std::mutex mutex_;
    Clock::time_point next_;
};

struct ClientOptions {
    std::string endpoint;  // scheme://host[:port][/prefix]
    std::string api_key;
    std::string provider = "generic";
    RetryPolicy retry;
    double rate_limit = 10.0;
    double timeout = 10.0;  // seconds per request
};

/// Endpoint and key from FACECOMPARE_ENDPOINT / FACECOMPARE_KEY, with
/// explicit values taking precedence when non-empty.
ClientOptions options_from_env(const std::string& endpoint = {}, const std::string& api_key = {});

struct BatchItem {
    std::optional<CompareResult> result;
    std::string error;
};

struct BatchSummary {
    double mean = 0.0;
    double median = 0.0;
    double std = 0.0;  // population standard deviation
    int n_success = 0;
    int n_failed = 0;
};

struct BatchResult {
    std::vector<BatchItem> items;
    BatchSummary summary;
};

BatchSummary summarize(const std::vector<double>& confidences, int n_failed);

/// Thread-safe; the rate limiter is shared by every call on one client.
class CompareClient {
public:
    explicit CompareClient(ClientOptions options);
    ~CompareClient();

    CompareResult compare(const ImageBuffer& a, const ImageBuffer& b) const;
    CompareResult compare_png(const std::string& png_a, const std::string& png_b) const;

    /// Each protected image against the target with at most `concurrency`
    /// requests in flight; failures are recorded per item.
    BatchResult batch_compare(const std::vector<ImageBuffer>& protected_images, const ImageBuffer& target,
                              int concurrency = 4) const;

    const ClientOptions& options() const { return options_; }

    /// Replaces the sleep used between retries (tests).
    void set_sleeper(std::function<void(double)> sleeper) { sleeper_ = std::move(sleeper); }

private:
    struct Endpoint;
    ClientOptions options_;
    std::unique_ptr<Endpoint> endpoint_;
    mutable RateLimiter limiter_;
    std::function<void(double)> sleeper_;
};

}  // namespace diffam::api
