#pragma once

#include <charconv>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "clm/image.hpp"
#include "clm/json_io.hpp"
#include "httplib.h"

namespace clm {

struct api_request {
  std::string method;
  std::string path;
  std::string body;
  std::map<std::string, std::string> query;
};

struct api_response {
  int status = 200;
  json body;
};

// Validation failure of a request field (400).
class bad_request : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace api_detail {

inline int status_for(error_code c) {
  switch (c) {
    case error_code::invalid_argument: return 400;
    case error_code::io_error: return 500;
    default: return 422;
  }
}

inline json error_body(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

inline double number(const json& body, const char* key) {
  if (!body.contains(key)) throw bad_request(std::string("missing field '") + key + "'");
  const auto& v = body[key];
  if (!v.is_number()) throw bad_request(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

inline double number_or(const json& body, const char* key, double fallback) {
  return body.contains(key) ? number(body, key) : fallback;
}

inline long long integer_or(const json& body, const char* key, long long fallback, long long lo, long long hi) {
  if (!body.contains(key)) return fallback;
  const auto& v = body[key];
  if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>())))
    throw bad_request(std::string("field '") + key + "' must be an integer");
  const long long x = v.is_number_integer() ? v.get<long long>() : static_cast<long long>(v.get<double>());
  if (x < lo || x > hi)
    throw bad_request(std::string("field '") + key + "' must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return x;
}

inline plane_point point(const json& body, const char* key, std::optional<plane_point> fallback = std::nullopt) {
  if (!body.contains(key)) {
    if (fallback) return *fallback;
    throw bad_request(std::string("missing field '") + key + "'");
  }
  const auto& v = body[key];
  plane_point z;
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    z = {v[0].get<double>(), v[1].get<double>()};
  else if (v.is_object() && v.contains("x") && v.contains("y") && v["x"].is_number() && v["y"].is_number())
    z = {v["x"].get<double>(), v["y"].get<double>()};
  else
    throw bad_request(std::string("field '") + key + "' must be [x, y] or {x, y}");
  if (!is_finite(z)) throw bad_request(std::string("field '") + key + "' must be finite");
  return z;
}

inline rect window(const json& body, rect fallback) {
  if (!body.contains("window")) return fallback;
  const auto& w = body["window"];
  if (!w.is_object()) throw bad_request("field 'window' must be an object {x0, x1, y0, y1}");
  rect r{number(w, "x0"), number(w, "x1"), number(w, "y0"), number(w, "y1")};
  if (!r.valid()) throw bad_request("window must have positive area");
  return r;
}

inline param_point params(const json& body) { return param_point(number(body, "mu"), number(body, "epsilon")); }

inline std::string base64(const std::string& bytes) { return httplib::detail::base64_encode(bytes); }

}  // namespace api_detail

// Stateless JSON service over the engines. The only shared state is the job
// registry mapping client request ids to stop tokens.
class api_service {
 public:
  struct config {
    std::size_t raster_cap_bytes = std::size_t{16} << 20;
    long long default_timeout_ms = 120000;
    unsigned threads = 0;
  };

  api_service() = default;
  explicit api_service(config c) : cfg_(c) {}

  api_response handle(const api_request& req) {
    json echo = json::object();
    try {
      if (req.method == "GET" && req.path == "/api/loci") {
        for (const auto& [k, v] : req.query) echo[k] = v;
        return loci_endpoint(req, echo);
      }
      if (req.method == "DELETE" && req.path.rfind("/api/jobs/", 0) == 0) {
        const std::string id = req.path.substr(10);
        echo["id"] = id;
        const bool ok = cancel(id);
        json body = {{"id", id}, {"cancelled", ok}, {"request", echo}};
        if (!ok) body.update(api_detail::error_body("NotFound", "no active job with id " + id));
        return {ok ? 200 : 404, body};
      }
      if (req.method != "POST") return {404, with_echo(api_detail::error_body("NotFound", req.method + " " + req.path), echo)};
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        return {400, with_echo(api_detail::error_body("BadRequest", std::string("malformed JSON: ") + e.what()), echo)};
      }
      if (!body.is_object()) return {400, with_echo(api_detail::error_body("BadRequest", "body must be a JSON object"), echo)};
      echo = body;
      if (req.path == "/api/orbit") return orbit_endpoint(body);
      if (req.path == "/api/preimages") return preimages_endpoint(body);
      if (req.path == "/api/basin") return basin_endpoint(body);
      if (req.path == "/api/attractor") return attractor_endpoint(body);
      if (req.path == "/api/gamma") return gamma_endpoint(body);
      if (req.path == "/api/hopf") return hopf_endpoint(body);
      return {404, with_echo(api_detail::error_body("NotFound", req.method + " " + req.path), echo)};
    } catch (const bad_request& e) {
      return {400, with_echo(api_detail::error_body("BadRequest", e.what()), echo)};
    } catch (const error& e) {
      return {api_detail::status_for(e.code()), with_echo(api_detail::error_body(to_string(e.code()), e.what()), echo)};
    } catch (const std::exception& e) {
      return {500, with_echo(api_detail::error_body("Internal", e.what()), echo)};
    }
  }

  bool cancel(const std::string& id) {
    std::lock_guard<std::mutex> lock(jobs_mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return false;
    it->second->cancel();
    return true;
  }

  std::size_t active_jobs() const {
    std::lock_guard<std::mutex> lock(jobs_mutex_);
    return jobs_.size();
  }

 private:
  // Registers a job's stop token under the client id (if any) for its lifetime.
  class job {
   public:
    job(api_service& svc, const json& body) : svc_(svc), token_(std::make_shared<stop_token>()) {
      const long long timeout = api_detail::integer_or(body, "timeout_ms", svc.cfg_.default_timeout_ms, 1, 3600000);
      token_->set_deadline(std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout));
      if (body.contains("request_id")) {
        if (!body["request_id"].is_string()) throw bad_request("field 'request_id' must be a string");
        id_ = body["request_id"].get<std::string>();
        std::lock_guard<std::mutex> lock(svc_.jobs_mutex_);
        if (!svc_.jobs_.emplace(id_, token_).second) throw bad_request("request_id '" + id_ + "' is already active");
      }
    }
    ~job() {
      if (id_.empty()) return;
      std::lock_guard<std::mutex> lock(svc_.jobs_mutex_);
      svc_.jobs_.erase(id_);
    }
    job(const job&) = delete;
    job& operator=(const job&) = delete;

    exec_options exec() const { return {svc_.cfg_.threads, token_.get()}; }
    const stop_token* token() const { return token_.get(); }
    // Status for a partial result: cancelled by the client is a normal reply.
    int partial_status() const { return token_->cancelled() ? 200 : 504; }

   private:
    api_service& svc_;
    std::shared_ptr<stop_token> token_;
    std::string id_;
  };

  static json with_echo(json body, const json& echo) {
    body["request"] = echo;
    return body;
  }

  api_response loci_endpoint(const api_request& req, const json& echo) {
    auto it = req.query.find("eps");
    if (it == req.query.end()) throw bad_request("missing query parameter 'eps'");
    double eps = 0.0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), eps);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(eps))
      throw bad_request("query parameter 'eps' must be a decimal number");
    json body = to_json(loci(eps));
    body["eps"] = eps;
    return {200, with_echo(body, echo)};
  }

  api_response orbit_endpoint(const json& b) {
    const auto p = api_detail::params(b);
    const auto z0 = api_detail::point(b, "z0");
    const long long n = api_detail::integer_or(b, "n_max", 1000, 0, 100000000);
    const long long samples = api_detail::integer_or(b, "max_samples", 10000, 1, 1000000);
    auto r = iterate_forward(p, z0, n, static_cast<std::size_t>(samples));
    return {200, with_echo(to_json(r), b)};
  }

  api_response preimages_endpoint(const json& b) {
    const auto p = api_detail::params(b);
    const auto root = api_detail::point(b, "root");
    const long long depth = api_detail::integer_or(b, "depth", 1, 0, 40);
    const long long budget = api_detail::integer_or(b, "budget", 100000, 1, 5000000);
    std::optional<rect> clip;
    if (b.contains("clip")) clip = api_detail::window(json{{"window", b["clip"]}}, {});
    job j(*this, b);
    auto t = preimage_tree(p, root, static_cast<int>(depth), static_cast<std::size_t>(budget), clip, j.exec());
    json body = to_json(t);
    const bool partial = j.token()->stop_requested() && t.levels.size() < static_cast<std::size_t>(depth) + 1;
    body["partial"] = partial;
    return {partial ? j.partial_status() : 200, with_echo(body, b)};
  }

  grid_spec raster_grid(const json& b, rect fallback, long long default_res) {
    const long long w = api_detail::integer_or(b, "width", default_res, 2, 1 << 15);
    const long long h = api_detail::integer_or(b, "height", default_res, 2, 1 << 15);
    if (static_cast<unsigned long long>(w) * static_cast<unsigned long long>(h) * 3ull > cfg_.raster_cap_bytes)
      throw payload_too_large(w, h);
    return grid_spec(api_detail::window(b, fallback), static_cast<int>(w), static_cast<int>(h));
  }

  struct payload_too_large_error : std::runtime_error {
    using std::runtime_error::runtime_error;
  };
  payload_too_large_error payload_too_large(long long w, long long h) const {
    return payload_too_large_error("raster " + std::to_string(w) + "x" + std::to_string(h) + " exceeds the " +
                                   std::to_string(cfg_.raster_cap_bytes) + "-byte cap");
  }

  template <class Fn>
  api_response guarded_raster(const json& b, Fn&& fn) {
    try {
      return fn();
    } catch (const payload_too_large_error& e) {
      return {413, with_echo(api_detail::error_body("PayloadTooLarge", e.what()), b)};
    }
  }

  api_response basin_endpoint(const json& b) {
    return guarded_raster(b, [&]() -> api_response {
      const auto p = api_detail::params(b);
      const auto g = raster_grid(b, {-0.1, 1.1, -0.1, 1.1}, 256);
      job j(*this, b);
      json body;
      bool partial = false;
      std::string png;
      if (b.contains("attractor_seed")) {
        basin_options o;
        o.n_max = static_cast<int>(api_detail::integer_or(b, "n_max", 2000, 0, 1000000));
        o.probe_steps = static_cast<int>(api_detail::integer_or(b, "probe_steps", 64, 1, 100000));
        o.attractor.n_total = api_detail::integer_or(b, "n_total", 1000000, 2, 100000000);
        o.attractor.n_transient = api_detail::integer_or(b, "n_transient", std::min(10000LL, o.attractor.n_total / 10), 0,
                                                         o.attractor.n_total - 1);
        o.attractor.period_window =
            static_cast<std::size_t>(std::min<long long>(o.attractor.n_total - o.attractor.n_transient, 1000000));
        auto r = render_basin_of_attractor(p, api_detail::point(b, "attractor_seed"), g, o, j.exec());
        body = sidecar(r);
        body["mode"] = "attractor";
        partial = r.partial;
        png = encode_png(paint_basin(r));
      } else {
        const int n = static_cast<int>(api_detail::integer_or(b, "n_max", 200, 0, 1000000));
        const int ss = static_cast<int>(api_detail::integer_or(b, "supersample", 1, 1, 8));
        auto r = render_escape(p, g, n, j.exec(), ss);
        body = sidecar(r);
        body["mode"] = "escape";
        partial = r.partial;
        png = encode_png(paint_escape(r));
      }
      body["png_base64"] = api_detail::base64(png);
      body["partial"] = partial;
      return {partial ? j.partial_status() : 200, with_echo(body, b)};
    });
  }

  api_response attractor_endpoint(const json& b) {
    return guarded_raster(b, [&]() -> api_response {
      const auto p = api_detail::params(b);
      const auto g = raster_grid(b, {0, 1, 0, 1}, 512);
      attractor_options o;
      o.n_total = api_detail::integer_or(b, "n_total", 1000000, 2, 100000000);
      o.n_transient = api_detail::integer_or(b, "n_transient", std::min(10000LL, o.n_total / 10), 0, o.n_total - 1);
      o.period_window = static_cast<std::size_t>(
          api_detail::integer_or(b, "period_window", std::min<long long>(o.n_total - o.n_transient, 1000000), 1,
                                 o.n_total - o.n_transient));
      auto a = estimate_attractor(p, api_detail::point(b, "z0"), g, o);
      json body = to_json(a);
      body["png_base64"] = api_detail::base64(encode_png(paint_attractor(a)));
      body["partial"] = false;
      return {200, with_echo(body, b)};
    });
  }

  api_response gamma_endpoint(const json& b) {
    const auto p = api_detail::params(b);
    gamma_options o;
    o.grid = static_cast<int>(api_detail::integer_or(b, "grid", 1024, 2, 1 << 16));
    if (o.grid % 2 != 0) throw bad_request("field 'grid' must be even");
    o.max_iters = static_cast<int>(api_detail::integer_or(b, "max_iters", 100000, 1, 10000000));
    o.tol = api_detail::number_or(b, "tol", 1e-10);
    const auto samples = static_cast<std::size_t>(api_detail::integer_or(b, "samples", 2048, 4, 1 << 20));
    job j(*this, b);
    try {
      auto r = build_gamma(p, o, j.token());
      json body = to_json(r);
      body["curve"] = to_json(resample(r.curve.assembled, samples).vertices);
      body["partial"] = false;
      return {200, with_echo(body, b)};
    } catch (const gamma_not_converged& e) {
      if (!j.token()->stop_requested()) throw;
      json body = {{"partial", true}, {"iterations", e.last_iterate.intervals()}};
      body["curve"] = to_json(resample(assemble_gamma(e.last_iterate).assembled, samples).vertices);
      body.update(api_detail::error_body(to_string(e.code()), e.what()));
      return {j.partial_status(), with_echo(body, b)};
    }
  }

  api_response hopf_endpoint(const json& b) {
    const double eps = api_detail::number(b, "epsilon");
    const double mu_start = b.contains("mu_start") ? api_detail::number(b, "mu_start") : api_detail::number(b, "mu");
    const double mu_end = api_detail::number(b, "mu_end");
    const double width = api_detail::number_or(b, "width", 1e-5);
    const int period = static_cast<int>(api_detail::integer_or(b, "period", 2, 1, 64));
    param_point start(mu_start, eps);
    const plane_point guess = b.contains("guess")
                                  ? api_detail::point(b, "guess")
                                  : seed_periodic_guess(start, period, api_detail::point(b, "seed", plane_point{0.3, 0.2}));
    job j(*this, b);
    try {
      auto h = hopf_bracket(eps, period, mu_start, mu_end, width, guess, {}, j.exec());
      json body = to_json(h);
      body["partial"] = false;
      return {200, with_echo(body, b)};
    } catch (const error& e) {
      if (!j.token()->stop_requested()) throw;
      json body = api_detail::error_body(to_string(e.code()), e.what());
      body["partial"] = true;
      return {j.partial_status(), with_echo(body, b)};
    }
  }

  config cfg_;
  mutable std::mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<stop_token>> jobs_;
};

// CORS is granted to localhost origins only.
inline bool local_origin(const std::string& origin) {
  for (const char* prefix : {"http://localhost", "http://127.0.0.1", "https://localhost", "https://127.0.0.1"}) {
    const std::string p(prefix);
    if (origin.rfind(p, 0) == 0 && (origin.size() == p.size() || origin[p.size()] == ':')) return true;
  }
  return false;
}

// HTTP front end for api_service.
class api_server {
 public:
  explicit api_server(api_service& svc) : svc_(svc) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      api_request r{req.method, req.path, req.body, {}};
      for (const auto& [k, v] : req.params) r.query[k] = v;
      auto out = svc_.handle(r);
      res.status = out.status;
      res.set_content(out.body.dump(), "application/json");
    };
    server_.Get(R"(/api/.*)", route);
    server_.Post(R"(/api/.*)", route);
    server_.Delete(R"(/api/.*)", route);
    server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
      const auto origin = req.get_header_value("Origin");
      if (!origin.empty() && local_origin(origin)) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
      }
    });
  }

  // Binds and serves on a background thread; port 0 picks a free port.
  int start(const std::string& host, int port) {
    bound_port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound_port_ < 0) throw error(error_code::io_error, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound_port_;
  }

  // Serves on the calling thread until stop().
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw error(error_code::io_error, "cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  ~api_server() { stop(); }

 private:
  api_service& svc_;
  httplib::Server server_;
  std::thread thread_;
  int bound_port_ = -1;
};

}  // namespace clm
