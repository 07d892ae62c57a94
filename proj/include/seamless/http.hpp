#pragma once

// HTTP routes over TrialService. Needs cpp-httplib on the include path.
// A client request id is taken from the Idempotency-Key or X-Request-Id
// header, or from a "request_id" field in the body.

// Eigen must come before httplib: <resolv.h> defines a _res macro that
// collides with Eigen's parameter names.
#include "seamless/service.hpp"

#include <httplib.h>

#include <optional>
#include <string>

namespace seamless {

namespace detail {

inline void send(httplib::Response& res, const ServiceResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(2) + "\n", "application/json");
}

inline std::string request_id(const httplib::Request& req, const json& body) {
  if (req.has_header("Idempotency-Key")) return req.get_header_value("Idempotency-Key");
  if (req.has_header("X-Request-Id")) return req.get_header_value("X-Request-Id");
  if (body.is_object() && body.contains("request_id") && body.at("request_id").is_string())
    return body.at("request_id").get<std::string>();
  return {};
}

inline std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (j.is_object()) j.erase("request_id");
    return j;
  } catch (const json::exception& e) {
    send(res, error_response(ErrorCode::SchemaMismatch, std::string("malformed JSON: ") + e.what()));
    return std::nullopt;
  }
}

inline std::optional<double> query_number(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key.c_str())) return std::nullopt;
  const auto v = req.get_param_value(key.c_str());
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == v.size() && !v.empty(), ErrorCode::InvalidParams,
          "query parameter '" + key + "' is not a number");
  return x;
}

}  // namespace detail

inline void install_routes(httplib::Server& srv, TrialService& svc) {
  using httplib::Request;
  using httplib::Response;

  srv.Post("/trials", [&svc](const Request& req, Response& res) {
    auto raw = json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
    const auto rid = raw.is_discarded() ? std::string() : detail::request_id(req, raw);
    if (auto body = detail::parse_body(req, res)) detail::send(res, svc.create(*body, rid));
  });

  srv.Get(R"(/trials/([0-9a-f]+))",
          [&svc](const Request& req, Response& res) { detail::send(res, svc.get(req.matches[1])); });

  auto post_op = [&srv, &svc](const std::string& suffix, auto call) {
    srv.Post("/trials/([0-9a-f]+)/" + suffix, [&svc, call](const Request& req, Response& res) {
      auto raw = json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
      const auto rid = raw.is_discarded() ? std::string() : detail::request_id(req, raw);
      if (auto body = detail::parse_body(req, res)) detail::send(res, call(svc, req.matches[1], *body, rid));
    });
  };
  post_op("cohorts", [](TrialService& s, const std::string& id, const json& b, const std::string& r) {
    return s.cohort(id, b, r);
  });
  post_op("backfill", [](TrialService& s, const std::string& id, const json& b, const std::string& r) {
    return s.add_backfill(id, b, r);
  });
  post_op("finalize", [](TrialService& s, const std::string& id, const json&, const std::string& r) {
    return s.finalize(id, r);
  });
  post_op("phase2", [](TrialService& s, const std::string& id, const json& b, const std::string& r) {
    return s.phase2(id, b, r);
  });

  srv.Get(R"(/trials/([0-9a-f]+)/analysis)", [&svc](const Request& req, Response& res) {
    try {
      const double tau = detail::query_number(req, "tau").value_or(0.3);
      const double alpha = detail::query_number(req, "alpha").value_or(0.05);
      auto fw = detail::query_number(req, "fixed_w");
      if (!fw) fw = detail::query_number(req, "fixed-w");
      detail::send(res, svc.analysis(req.matches[1], tau, alpha, fw));
    } catch (const Error& e) {
      detail::send(res, error_response(e.code(), e.what()));
    }
  });

  srv.Get("/health", [](const Request&, Response& res) {
    res.set_content("{\"status\": \"ok\"}\n", "application/json");
  });

  srv.set_error_handler([](const Request&, Response& res) {
    if (res.status == 404 && res.body.empty())
      detail::send(res, error_response(ErrorCode::NotFound, "no such route"));
  });
}

}  // namespace seamless
