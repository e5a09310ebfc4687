#include "shiftdiag/service.hpp"

#include <array>
#include <cstdio>
#include <random>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "shiftdiag/error.hpp"
#include "shiftdiag/pipeline.hpp"
#include "shiftdiag/result.hpp"

namespace shiftdiag {
namespace {

using nlohmann::json;

json summary_json(const TableSummary& s) {
  json cols = json::array();
  for (const auto& c : s.columns)
    cols.push_back({{"name", c.name}, {"inferred_type", c.inferred_type}, {"distinct", c.distinct}});
  return {{"rows", s.rows}, {"columns", cols}};
}

// Checks the uploaded table against whatever the fragment declares.
void validate_fragment(const CsvTable& table, const std::string& fragment) {
  json j;
  try {
    j = json::parse(fragment);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("spec must be a JSON object");
  if (!j.contains("treatment_column") || !j.contains("outcome_columns"))
    throw ValidationError("spec needs treatment_column and outcome_columns");
  if (!j.contains("regression_template")) {
    // The template does not affect column validation; pick one the outcome
    // count admits.
    const auto outcomes = j["outcome_columns"];
    j["regression_template"] = outcomes.is_array() && outcomes.size() > 1 ? "anova2" : "ttest";
  }
  j.erase("selection");
  AnalysisSpec spec;
  try {
    spec = j.get<AnalysisSpec>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("spec: ") + e.what());
  }
  StudyDataset::from_table(table, spec, StudyRole::kOriginal);
}

ApiResponse ok_json(const json& j) { return {200, j.dump(), "application/json"}; }

}  // namespace

SessionStore::SessionStore(std::chrono::seconds idle_timeout, std::size_t max_dataset_bytes,
                           std::size_t max_store_bytes)
    : idle_timeout_(idle_timeout), max_dataset_bytes_(max_dataset_bytes), max_store_bytes_(max_store_bytes) {}

std::string new_session_id() {
  static thread_local std::random_device device;
  std::array<std::uint32_t, 4> words{};
  for (auto& w : words) w = device();
  char buf[33];
  std::snprintf(buf, sizeof buf, "%08x%08x%08x%08x", words[0], words[1], words[2], words[3]);
  return buf;
}

std::string SessionStore::put(StoredDataset dataset) {
  if (dataset.bytes > max_dataset_bytes_ || dataset.bytes > max_store_bytes_)
    throw ValidationError("dataset exceeds the size limit");
  std::lock_guard lock(mutex_);
  const auto now = Clock::now();
  evict_idle_locked(now);
  while (total_bytes_ + dataset.bytes > max_store_bytes_ && !entries_.empty()) {
    auto oldest = entries_.begin();
    for (auto it = entries_.begin(); it != entries_.end(); ++it)
      if (it->second.last_access < oldest->second.last_access) oldest = it;
    total_bytes_ -= oldest->second.data->bytes;
    entries_.erase(oldest);
  }
  std::string id;
  do {
    id = new_session_id();
  } while (entries_.count(id));
  total_bytes_ += dataset.bytes;
  entries_[id] = {std::make_shared<const StoredDataset>(std::move(dataset)), now};
  return id;
}

std::shared_ptr<const StoredDataset> SessionStore::get(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto now = Clock::now();
  evict_idle_locked(now);
  const auto it = entries_.find(id);
  if (it == entries_.end()) return nullptr;
  it->second.last_access = now;
  return it->second.data;
}

std::size_t SessionStore::size() {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::size_t SessionStore::bytes() {
  std::lock_guard lock(mutex_);
  return total_bytes_;
}

void SessionStore::evict_idle(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  evict_idle_locked(now);
}

void SessionStore::evict_idle_locked(Clock::time_point now) {
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (now - it->second.last_access > idle_timeout_) {
      total_bytes_ -= it->second.data->bytes;
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
}

ApiResponse api_error(int status, const std::string& code, const std::string& message,
                      const std::string& detail) {
  return {status, json{{"code", code}, {"message", message}, {"detail", detail}}.dump(),
          "application/json"};
}

ApiResponse post_dataset(SessionStore& store, const std::string& csv,
                         const std::optional<std::string>& spec_fragment) {
  if (csv.size() > store.max_dataset_bytes())
    return api_error(413, "payload_too_large", "dataset exceeds the size limit");
  try {
    StoredDataset ds;
    ds.table = parse_csv(csv);
    if (spec_fragment && !spec_fragment->empty()) validate_fragment(ds.table, *spec_fragment);
    ds.summary = summarize_table(ds.table);
    ds.bytes = csv.size();
    const TableSummary summary = ds.summary;
    const std::string id = store.put(std::move(ds));
    return ok_json({{"id", id}, {"summary", summary_json(summary)}});
  } catch (const ValidationError& e) {
    return api_error(400, "validation_error", e.what());
  }
}

ApiResponse post_decompose(SessionStore& store, const std::string& body, std::size_t threads) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception& e) {
    return api_error(400, "validation_error", "request body is not valid JSON", e.what());
  }
  if (!req.is_object() || !req.contains("original_id") || !req.contains("replication_id") ||
      !req.contains("spec"))
    return api_error(400, "validation_error", "request needs original_id, replication_id and spec");
  if (!req["original_id"].is_string() || !req["replication_id"].is_string())
    return api_error(400, "validation_error", "dataset ids must be strings");

  const std::string id1 = req["original_id"].get<std::string>();
  const std::string id2 = req["replication_id"].get<std::string>();
  const auto d1 = store.get(id1);
  if (!d1) return api_error(404, "not_found", "unknown dataset id", id1);
  const auto d2 = store.get(id2);
  if (!d2) return api_error(404, "not_found", "unknown dataset id", id2);

  try {
    AnalysisSpec spec;
    try {
      spec = req["spec"].get<AnalysisSpec>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("spec: ") + e.what());
    }
    spec.validate();
    PipelineOptions opts;
    opts.threads = threads;
    if (req.contains("level") && !req["level"].is_null()) opts.level = req["level"].get<double>();
    if (req.contains("selection") && !req["selection"].is_null()) {
      const json& s = req["selection"];
      opts.selection_alpha0 = s.is_number() ? s.get<double>() : s.at("alpha0").get<double>();
    }
    const StudyDataset original = StudyDataset::from_table(d1->table, spec, StudyRole::kOriginal);
    const StudyDataset replication = StudyDataset::from_table(d2->table, spec, StudyRole::kReplication);
    const PipelineResult result = run_pipeline(original, replication, spec, opts);
    return {200, serialize(result.document), "application/json"};
  } catch (const json::exception& e) {
    return api_error(400, "validation_error", "malformed request", e.what());
  } catch (const ValidationError& e) {
    return api_error(400, "validation_error", e.what());
  } catch (const InfeasibleError& e) {
    return api_error(422, "infeasible", e.what(), e.label());
  } catch (const SingularError& e) {
    return api_error(422, "singular", e.what());
  } catch (const SelectionError& e) {
    return api_error(409, "selection", e.what());
  }
}

struct ApiServer::Impl {
  ServiceConfig config;
  SessionStore store;
  httplib::Server server;
  int port = -1;

  explicit Impl(ServiceConfig c)
      : config(std::move(c)), store(config.idle_timeout, config.max_body_bytes, config.max_store_bytes) {}
};

ApiServer::ApiServer(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  auto& srv = impl_->server;
  auto& cfg = impl_->config;
  const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  srv.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  srv.set_payload_max_length(cfg.max_body_bytes);
  srv.set_read_timeout(cfg.request_timeout);
  srv.set_write_timeout(cfg.request_timeout);

  auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  Impl* impl = impl_.get();
  srv.Post("/api/datasets", [impl, send](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) {
      send(res, api_error(400, "validation_error", "expected multipart/form-data with a 'file' part"));
      return;
    }
    if (!req.has_file("file")) {
      send(res, api_error(400, "validation_error", "missing 'file' part"));
      return;
    }
    std::optional<std::string> spec;
    if (req.has_file("spec")) spec = req.get_file_value("spec").content;
    send(res, post_dataset(impl->store, req.get_file_value("file").content, spec));
  });
  srv.Post("/api/decompose", [impl, send](const httplib::Request& req, httplib::Response& res) {
    send(res, post_decompose(impl->store, req.body, impl->config.pipeline_threads));
  });
  srv.Get("/api/health", [impl, send](const httplib::Request&, httplib::Response& res) {
    send(res, ok_json({{"status", "ok"}, {"datasets", impl->store.size()}}));
  });
  srv.Get("/api/version", [send](const httplib::Request&, httplib::Response& res) {
    send(res, ok_json({{"version", engine_version()}}));
  });
  if (!cfg.static_dir.empty()) srv.set_mount_point("/", cfg.static_dir);
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const ApiResponse r = res.status == 413 ? api_error(413, "payload_too_large", "request body exceeds the size limit")
                          : res.status == 404 ? api_error(404, "not_found", "no such resource")
                                              : api_error(res.status, "http_error", "request failed");
    res.set_content(r.body, r.content_type);
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unexpected failure";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    const ApiResponse r = api_error(500, "internal", what);
    res.status = 500;
    res.set_content(r.body, r.content_type);
  });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  auto& cfg = impl_->config;
  if (cfg.port == 0)
    impl_->port = impl_->server.bind_to_any_port(cfg.host);
  else
    impl_->port = impl_->server.bind_to_port(cfg.host, cfg.port) ? cfg.port : -1;
  if (impl_->port < 0) throw Error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  return impl_->port;
}

void ApiServer::serve() { impl_->server.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_) impl_->server.stop();
}

SessionStore& ApiServer::store() { return impl_->store; }

}  // namespace shiftdiag
