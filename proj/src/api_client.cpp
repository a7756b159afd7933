#include "diffam/api_client.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "diffam/image_io.hpp"

namespace diffam::api {

const char* to_string(ApiError::Kind kind)
{
    switch (kind) {
    case ApiError::Kind::auth: return "auth";
    case ApiError::Kind::malformed: return "malformed";
    case ApiError::Kind::out_of_range: return "out_of_range";
    case ApiError::Kind::exhausted: return "exhausted";
    case ApiError::Kind::request: return "request";
    }
    return "unknown";
}

double RetryPolicy::delay(int retry) const { return base_delay * std::pow(factor, retry); }

RateLimiter::RateLimiter(double requests_per_second) : rate_(requests_per_second), next_(Clock::now())
{
    if (!(requests_per_second > 0.0))
        throw std::invalid_argument("rate limiter: rate must be positive");
}

void RateLimiter::acquire()
{
    Clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        const auto now = Clock::now();
        slot = std::max(now, next_);
        next_ = slot + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / rate_));
    }
    std::this_thread::sleep_until(slot);
}

ClientOptions options_from_env(const std::string& endpoint, const std::string& api_key)
{
    ClientOptions o;
    o.endpoint = endpoint;
    o.api_key = api_key;
    if (o.endpoint.empty())
        if (const char* e = std::getenv("FACECOMPARE_ENDPOINT"))
            o.endpoint = e;
    if (o.api_key.empty())
        if (const char* k = std::getenv("FACECOMPARE_KEY"))
            o.api_key = k;
    if (o.endpoint.empty())
        throw std::invalid_argument("face compare: no endpoint (set FACECOMPARE_ENDPOINT)");
    return o;
}

BatchSummary summarize(const std::vector<double>& confidences, int n_failed)
{
    BatchSummary s;
    s.n_success = static_cast<int>(confidences.size());
    s.n_failed = n_failed;
    if (confidences.empty())
        return s;
    std::vector<double> v = confidences;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    for (double c : v)
        s.mean += c;
    s.mean /= double(n);
    s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    double ss = 0.0;
    for (double c : v)
        ss += (c - s.mean) * (c - s.mean);
    s.std = std::sqrt(ss / double(n));
    return s;
}

struct CompareClient::Endpoint {
    std::string origin;  // scheme://host:port
    std::string path;    // prefix + /compare
};

CompareClient::CompareClient(ClientOptions options)
    : options_(std::move(options)), limiter_(options_.rate_limit),
      sleeper_([](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); })
{
    const std::string& e = options_.endpoint;
    const auto scheme_end = e.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("face compare: endpoint needs a scheme: " + e);
    const auto path_start = e.find('/', scheme_end + 3);
    endpoint_ = std::make_unique<Endpoint>();
    endpoint_->origin = e.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? "" : e.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();
    endpoint_->path = prefix + "/compare";
}

CompareClient::~CompareClient() = default;

CompareResult CompareClient::compare(const ImageBuffer& a, const ImageBuffer& b) const
{
    const auto pa = encode_png(a);
    const auto pb = encode_png(b);
    return compare_png(std::string(pa.begin(), pa.end()), std::string(pb.begin(), pb.end()));
}

CompareResult CompareClient::compare_png(const std::string& png_a, const std::string& png_b) const
{
    using Kind = ApiError::Kind;
    const auto start = std::chrono::steady_clock::now();
    const httplib::MultipartFormDataItems items = {
        {"image_a", png_a, "image_a.png", "image/png"},
        {"image_b", png_b, "image_b.png", "image/png"},
    };
    httplib::Headers headers;
    if (!options_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + options_.api_key);

    std::string last_failure;
    for (int attempt = 0; attempt <= options_.retry.max_retries; ++attempt) {
        if (attempt > 0)
            sleeper_(options_.retry.delay(attempt - 1));
        limiter_.acquire();

        httplib::Client cli(endpoint_->origin);
        const auto timeout = std::chrono::duration<double>(options_.timeout);
        cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        const auto res = cli.Post(endpoint_->path, headers, items);

        if (!res) {
            last_failure = "connection error: " + httplib::to_string(res.error());
            continue;
        }
        const int status = res->status;
        if (status == 401 || status == 403)
            throw ApiError(Kind::auth, "face compare: authentication rejected (HTTP " + std::to_string(status) + ")");
        if (status == 429 || status >= 500) {
            last_failure = "HTTP " + std::to_string(status);
            continue;
        }
        if (status != 200)
            throw ApiError(Kind::request, "face compare: HTTP " + std::to_string(status) + ": " + res->body);

        const auto body = nlohmann::json::parse(res->body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("confidence") ||
            !body["confidence"].is_number())
            throw ApiError(Kind::malformed, "face compare: malformed response: " + res->body.substr(0, 200));
        const double confidence = body["confidence"].get<double>();
        if (!(confidence >= 0.0 && confidence <= 100.0))
            throw ApiError(Kind::out_of_range, "face compare: confidence " + std::to_string(confidence) +
                                                   " outside [0, 100]");
        CompareResult r;
        r.confidence = confidence;
        r.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        r.provider = options_.provider;
        r.attempts = attempt + 1;
        return r;
    }
    throw ApiError(Kind::exhausted, "face compare: retries exhausted after " +
                                        std::to_string(options_.retry.max_retries + 1) + " attempts (" +
                                        last_failure + ")");
}

BatchResult CompareClient::batch_compare(const std::vector<ImageBuffer>& protected_images, const ImageBuffer& target,
                                         int concurrency) const
{
    if (concurrency < 1)
        throw std::invalid_argument("batch_compare: concurrency must be >= 1");
    BatchResult out;
    out.items.resize(protected_images.size());
    const auto target_png = encode_png(target);
    const std::string target_bytes(target_png.begin(), target_png.end());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < protected_images.size(); i = next++) {
            try {
                const auto png = encode_png(protected_images[i]);
                out.items[i].result = compare_png(std::string(png.begin(), png.end()), target_bytes);
            } catch (const std::exception& e) {
                out.items[i].error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min<std::size_t>(std::size_t(concurrency), protected_images.size());
    for (std::size_t t = 0; t < n_threads; ++t)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();

    std::vector<double> confidences;
    int failed = 0;
    for (const auto& item : out.items) {
        if (item.result)
            confidences.push_back(item.result->confidence);
        else
            ++failed;
    }
    out.summary = summarize(confidences, failed);
    return out;
}

}  // namespace diffam::api
