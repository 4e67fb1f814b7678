#include <chrono>
#include <cmath>
#include <future>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "limetree/blackbox.hpp"
#include "limetree/error.hpp"

namespace limetree {

nlohmann::json encode_instance(const Instance& instance) {
  if (const auto* image = std::get_if<RgbImage>(&instance)) return base64_encode(encode_ppm(*image));
  return std::get<TokenSequence>(instance).tokens;
}

Instance decode_instance(const nlohmann::json& value) {
  if (value.is_string()) return decode_rgb_image(base64_decode(value.get<std::string>()));
  if (value.is_array()) return TokenSequence{value.get<std::vector<std::string>>()};
  fail(ErrorCode::protocol, "instance must be a base64 image string or a token array");
}

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  require(scheme != std::string::npos, "remote URL must include a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class RemoteBlackBox final : public BlackBox {
 public:
  explicit RemoteBlackBox(RemoteOptions options) : options_(std::move(options)), endpoint_(split_url(options_.url)) {
    require(options_.class_count >= 2, "remote black box needs class_count >= 2");
    require(options_.batch_size >= 1, "batch size must be positive");
    require(options_.max_in_flight >= 1, "max_in_flight must be positive");
  }

  std::size_t class_count() const override { return options_.class_count; }

  std::vector<std::string> class_names() const override {
    if (options_.class_names.size() == options_.class_count) return options_.class_names;
    return BlackBox::class_names();
  }

  Matrix predict_batch(std::span<const Instance> instances) const override {
    require(!instances.empty(), "predict_batch needs at least one instance");
    Matrix out(instances.size(), options_.class_count);
    const std::size_t batches = (instances.size() + options_.batch_size - 1) / options_.batch_size;
    for (std::size_t wave = 0; wave < batches; wave += options_.max_in_flight) {
      std::vector<std::future<Matrix>> in_flight;
      const std::size_t wave_end = std::min(batches, wave + options_.max_in_flight);
      for (std::size_t b = wave; b < wave_end; ++b) {
        const std::size_t start = b * options_.batch_size;
        const std::size_t end = std::min(instances.size(), start + options_.batch_size);
        in_flight.push_back(std::async(std::launch::async, [this, instances, start, end] {
          return request(instances.subspan(start, end - start));
        }));
      }
      for (std::size_t b = wave; b < wave_end; ++b) {
        const Matrix rows = in_flight[b - wave].get();
        const std::size_t start = b * options_.batch_size;
        for (std::size_t r = 0; r < rows.rows(); ++r)
          std::copy(rows.row(r).begin(), rows.row(r).end(), out.row(start + r).begin());
      }
    }
    return out;
  }

 private:
  Matrix request(std::span<const Instance> instances) const {
    nlohmann::json body;
    body["instances"] = nlohmann::json::array();
    for (const auto& instance : instances) body["instances"].push_back(encode_instance(instance));
    const std::string payload = body.dump();

    httplib::Client client(endpoint_.base);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);
    client.set_write_timeout(options_.timeout_seconds, 0);

    int attempt = 0;
    for (;;) {
      ++attempt;
      auto response = client.Post(endpoint_.path, payload, "application/json");
      if (!response) {
        if (attempt > options_.retries)
          throw TransportError("remote black box unreachable at " + options_.url + ": " +
                                   httplib::to_string(response.error()),
                               attempt, 0, true);
        std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
        continue;
      }
      if (response->status == 503 && attempt <= options_.retries) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
        continue;
      }
      if (response->status != 200)
        fail(ErrorCode::protocol, "remote black box answered HTTP " + std::to_string(response->status));
      return parse(response->body, instances.size());
    }
  }

  Matrix parse(const std::string& text, std::size_t expected_rows) const {
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::protocol, std::string("remote reply is not JSON: ") + e.what());
    }
    if (!reply.contains("probabilities") || !reply["probabilities"].is_array())
      fail(ErrorCode::protocol, "remote reply lacks a probabilities array");
    const auto& rows = reply["probabilities"];
    if (rows.size() != expected_rows)
      fail(ErrorCode::protocol, "remote reply has " + std::to_string(rows.size()) + " rows, expected " +
                                    std::to_string(expected_rows));
    Matrix out(expected_rows, options_.class_count);
    for (std::size_t r = 0; r < expected_rows; ++r) {
      if (!rows[r].is_array() || rows[r].size() != options_.class_count)
        fail(ErrorCode::protocol, "remote row " + std::to_string(r) + " has the wrong length");
      double total = 0.0;
      for (std::size_t c = 0; c < options_.class_count; ++c) {
        if (!rows[r][c].is_number()) fail(ErrorCode::protocol, "remote probabilities must be numbers");
        const double v = rows[r][c].get<double>();
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::protocol, "remote probability outside [0, 1]");
        out(r, c) = v;
        total += v;
      }
      // Single-precision servers are tolerated; rows are renormalised so the
      // simplex invariant holds to double precision downstream.
      if (std::abs(total - 1.0) > 1e-6) fail(ErrorCode::protocol, "remote probabilities do not sum to 1");
      for (std::size_t c = 0; c < options_.class_count; ++c) out(r, c) /= total;
    }
    return out;
  }

  RemoteOptions options_;
  Endpoint endpoint_;
};

}  // namespace

BlackBoxPtr make_remote(const RemoteOptions& options) { return std::make_shared<RemoteBlackBox>(options); }

void serve_black_box(httplib::Server& server, BlackBoxPtr model, const std::string& path) {
  server.Post(path, [model](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto body = nlohmann::json::parse(req.body);
      std::vector<Instance> instances;
      for (const auto& item : body.at("instances")) instances.push_back(decode_instance(item));
      const Matrix probs = model->predict_batch(instances);
      res.set_content(nlohmann::json{{"probabilities", probs.to_rows()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

}  // namespace limetree
