#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "shiftdiag/analysis_spec.hpp"
#include "shiftdiag/csv.hpp"
#include "shiftdiag/dataset.hpp"

namespace shiftdiag {

struct StoredDataset {
  CsvTable table;
  TableSummary summary;
  std::size_t bytes = 0;
};

// In-memory datasets keyed by unguessable ids. Entries idle longer than the
// timeout are evicted; when the total size would exceed the cap the least
// recently used entries go first.
class SessionStore {
 public:
  using Clock = std::chrono::steady_clock;

  SessionStore(std::chrono::seconds idle_timeout, std::size_t max_dataset_bytes,
               std::size_t max_store_bytes);

  // Throws ValidationError when the dataset alone exceeds the per-dataset cap.
  std::string put(StoredDataset dataset);
  // nullptr for unknown or evicted ids.
  std::shared_ptr<const StoredDataset> get(const std::string& id);
  std::size_t size();
  std::size_t bytes();
  std::size_t max_dataset_bytes() const { return max_dataset_bytes_; }

  // Test hook: evicts as if `now` were the current time.
  void evict_idle(Clock::time_point now);

 private:
  struct Entry {
    std::shared_ptr<const StoredDataset> data;
    Clock::time_point last_access;
  };
  void evict_idle_locked(Clock::time_point now);

  std::mutex mutex_;
  std::map<std::string, Entry> entries_;
  std::chrono::seconds idle_timeout_;
  std::size_t max_dataset_bytes_;
  std::size_t max_store_bytes_;
  std::size_t total_bytes_ = 0;
};

// 128 random bits as 32 lowercase hex characters.
std::string new_session_id();

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// {code, message, detail}
ApiResponse api_error(int status, const std::string& code, const std::string& message,
                      const std::string& detail = "");

// POST /api/datasets with the CSV text and an optional spec fragment (JSON
// text naming at least treatment_column and outcome_columns).
ApiResponse post_dataset(SessionStore& store, const std::string& csv,
                         const std::optional<std::string>& spec_fragment);

// POST /api/decompose with body
//   {original_id, replication_id, spec, selection?: {alpha0} | alpha0, level?}.
ApiResponse post_decompose(SessionStore& store, const std::string& body, std::size_t threads);

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::chrono::seconds idle_timeout{1800};
  std::size_t max_body_bytes = 50u * 1024u * 1024u;
  std::size_t max_store_bytes = 1024u * 1024u * 1024u;
  std::size_t workers = 8;
  std::size_t pipeline_threads = 1;
  std::chrono::seconds request_timeout{120};
};

// HTTP front end over the handlers above.
class ApiServer {
 public:
  explicit ApiServer(ServiceConfig config);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds (port 0 picks a free port) and returns the bound port.
  int bind();
  // Blocks serving requests until stop().
  void serve();
  void stop();
  SessionStore& store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shiftdiag
