#include "cohortlab/service/http.hpp"

#include <regex>

#include "cohortlab/error.hpp"
#include "cohortlab/service/views.hpp"
#include "cohortlab/stats/registry.hpp"
#include "cohortlab/version.hpp"
#include "httplib.h"

namespace cohortlab::service {

using nlohmann::json;

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::not_found:
      return 404;
    case ErrorCode::digest_mismatch:
      return 409;
    case ErrorCode::empty_selection:
    case ErrorCode::empty_input:
    case ErrorCode::zero_margin:
    case ErrorCode::degenerate_element:
      return 422;
    case ErrorCode::io_error:
    case ErrorCode::eigen_failure:
      return 500;
    default:
      return 400;
  }
}

namespace {

HttpResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, json{{"error", {{"code", code}, {"message", message}}}}};
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  auto j = json::parse(body);
  if (!j.is_object()) throw Error(ErrorCode::parse_error, "request body must be a JSON object");
  return j;
}

HttpResponse route(Engine& engine, const std::string& method, const std::string& path, const std::string& body) {
  static const std::regex cohort_attrs(R"(^/v1/cohorts/([^/]+)/attributes$)");
  static const std::regex session_op(R"(^/v1/sessions/([^/]+)/(selections|runs|stats|views|export|provenance)$)");
  static const std::regex run_report(R"(^/v1/runs/([^/]+)/report$)");
  std::smatch m;

  if (path == "/v1/health") {
    if (method != "GET") return error_response(405, "MethodNotAllowed", method + " " + path);
    return {200, json{{"status", "ok"}, {"estimators", stats::estimator_names()}, {"views", view_names()}}};
  }
  if (path == "/v1/cohorts") {
    if (method != "POST") return error_response(405, "MethodNotAllowed", method + " " + path);
    return {201, engine.ingest(parse_body(body))};
  }
  if (std::regex_match(path, m, cohort_attrs)) {
    if (method != "GET") return error_response(405, "MethodNotAllowed", method + " " + path);
    return {200, engine.attributes(m[1])};
  }
  if (path == "/v1/sessions") {
    if (method != "POST") return error_response(405, "MethodNotAllowed", method + " " + path);
    return {201, engine.create_session(parse_body(body).at("cohort_id").get<std::string>())};
  }
  if (std::regex_match(path, m, run_report)) {
    if (method != "GET") return error_response(405, "MethodNotAllowed", method + " " + path);
    return {200, engine.run_report(m[1])};
  }
  if (path == "/v1/replay") {
    if (method != "POST") return error_response(405, "MethodNotAllowed", method + " " + path);
    const auto req = parse_body(body);
    return {201, engine.replay(req.at("archive"), req.value("cohort_id", std::string()))};
  }
  if (std::regex_match(path, m, session_op)) {
    const std::string id = m[1], op = m[2];
    const bool is_get = op == "export" || op == "provenance";
    if (method != (is_get ? "GET" : "POST")) return error_response(405, "MethodNotAllowed", method + " " + path);
    if (op == "export") return {200, engine.export_session(id)};
    if (op == "provenance") return {200, engine.provenance(id)};
    const auto req = parse_body(body);
    const auto selection = req.value("selection", std::string());
    if (op == "selections") {
      return {201, engine.apply_selection(id, req.at("name").get<std::string>(), req.value("predicates", json::array()))};
    }
    if (op == "runs") return {201, engine.run_clustering(id, req)};
    if (op == "stats") {
      return {200, engine.query_stats(id, req.at("estimator").get<std::string>(), req.value("params", json::object()),
                                      selection)};
    }
    return {200, engine.view(id, req.at("view").get<std::string>(), req.value("params", json::object()), selection)};
  }
  return error_response(404, to_string(ErrorCode::not_found), "no route for " + method + " " + path);
}

}  // namespace

HttpResponse dispatch(Engine& engine, const std::string& method, const std::string& path, const std::string& body) {
  HttpResponse r;
  try {
    r = route(engine, method, path, body);
  } catch (const Error& e) {
    r = error_response(http_status(e.code()), to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    r = error_response(400, to_string(ErrorCode::parse_error), e.what());
  } catch (const std::exception& e) {
    r = error_response(500, "Internal", e.what());
  }
  r.body["engine"] = {{"name", kEngineName}, {"version", kEngineVersion}};
  return r;
}

HttpServer::HttpServer(Engine& engine) : engine_(engine), server_(std::make_unique<httplib::Server>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = dispatch(engine_, req.method, req.path, req.body);
    res.status = r.status;
    res.set_header("X-Engine-Version", kEngineVersion);
    res.set_content(r.body.dump(), "application/json");
  };
  const std::string any = R"(/v1/.*)";
  server_->Get(any, handler);
  server_->Post(any, handler);
  server_->Put(any, handler);
  server_->Delete(any, handler);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

}  // namespace cohortlab::service
