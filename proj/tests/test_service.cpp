#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "shiftdiag/error.hpp"
#include "shiftdiag/pipeline.hpp"
#include "shiftdiag/result.hpp"
#include "shiftdiag/service.hpp"

// After the Eigen users: glibc resolv.h defines _res as a macro.
#include <httplib.h>
#include <nlohmann/json.hpp>

using namespace shiftdiag;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string fixture(const std::string& name) { return slurp(std::string(SHIFTDIAG_FIXTURES "/") + name); }

SessionStore make_store(std::size_t max_dataset = 1 << 20, std::size_t max_total = 1 << 24) {
  return SessionStore(std::chrono::seconds(60), max_dataset, max_total);
}

StoredDataset blob(std::size_t bytes) {
  StoredDataset d;
  d.bytes = bytes;
  return d;
}

std::string upload(SessionStore& store, const std::string& csv) {
  const auto r = post_dataset(store, csv, std::nullopt);
  REQUIRE(r.status == 200);
  return json::parse(r.body).at("id").get<std::string>();
}

std::string decompose_body(const std::string& a, const std::string& b, const json& spec,
                           const json& extra = json::object()) {
  json j = {{"original_id", a}, {"replication_id", b}, {"spec", spec}};
  j.update(extra);
  return j.dump();
}

// Null effect, wide noise: |z| sits well under any usual threshold.
const char* kFlatCsv =
    "y,t\n1,0\n1.1,1\n2,0\n1.9,1\n3,0\n3.05,1\n0.5,0\n0.45,1\n4,0\n4.1,1\n";

std::string grouped_csv(bool with_b) {
  std::string csv = "y,t,g\n";
  const char* levels[] = {"a", "a", "b", "a"};
  for (int i = 0; i < 24; ++i) {
    const char* g = with_b ? levels[i % 4] : "a";
    csv += std::to_string(0.3 * i + (i % 2) * 1.5 + (i % 7) * 0.2) + "," + std::to_string(i % 2) + "," + g + "\n";
  }
  return csv;
}

}  // namespace

TEST_CASE("session ids are 32 lowercase hex characters and distinct") {
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) ids.push_back(new_session_id());
  for (const auto& id : ids) {
    CHECK(id.size() == 32);
    CHECK(std::all_of(id.begin(), id.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }));
  }
  std::sort(ids.begin(), ids.end());
  CHECK(std::unique(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("session store put, get and size accounting") {
  auto store = make_store();
  const auto a = store.put(blob(10));
  const auto b = store.put(blob(20));
  CHECK(a != b);
  CHECK(store.size() == 2);
  CHECK(store.bytes() == 30);
  REQUIRE(store.get(a));
  CHECK(store.get(a)->bytes == 10);
  CHECK(store.get("0123") == nullptr);
}

TEST_CASE("idle entries are evicted") {
  auto store = make_store();
  const auto a = store.put(blob(5));
  store.evict_idle(SessionStore::Clock::now() + std::chrono::seconds(30));
  CHECK(store.get(a) != nullptr);
  store.evict_idle(SessionStore::Clock::now() + std::chrono::seconds(61));
  CHECK(store.get(a) == nullptr);
  CHECK(store.bytes() == 0);
}

TEST_CASE("least recently used entries make room") {
  auto store = make_store(100, 100);
  const auto a = store.put(blob(40));
  std::this_thread::sleep_for(std::chrono::milliseconds(2));
  const auto b = store.put(blob(40));
  std::this_thread::sleep_for(std::chrono::milliseconds(2));
  REQUIRE(store.get(a));  // a is now more recent than b
  std::this_thread::sleep_for(std::chrono::milliseconds(2));
  const auto c = store.put(blob(40));
  CHECK(store.get(b) == nullptr);
  CHECK(store.get(a) != nullptr);
  CHECK(store.get(c) != nullptr);
  CHECK(store.bytes() == 80);
  CHECK_THROWS_AS(store.put(blob(101)), ValidationError);
}

TEST_CASE("dataset upload returns a summary") {
  auto store = make_store();
  const auto r = post_dataset(store, "y,t,g\n1.5,0,a\n2,1,b\n3,1,a\n", std::nullopt);
  REQUIRE(r.status == 200);
  const auto j = json::parse(r.body);
  CHECK(j["id"].get<std::string>().size() == 32);
  CHECK(j["summary"]["rows"] == 3);
  REQUIRE(j["summary"]["columns"].size() == 3);
  CHECK(j["summary"]["columns"][0]["name"] == "y");
  CHECK(j["summary"]["columns"][2]["distinct"] == 2);
  CHECK(store.size() == 1);
}

TEST_CASE("dataset upload validation against a spec fragment") {
  auto store = make_store();
  const auto r = post_dataset(store, "y,t\n1,0\n2,2\n", std::string(R"({"treatment_column":"t","outcome_columns":["y"]})"));
  CHECK(r.status == 400);
  const auto j = json::parse(r.body);
  CHECK(j["code"] == "validation_error");
  CHECK(j["message"].get<std::string>().find("treatment not coded 0/1") != std::string::npos);
  CHECK(store.size() == 0);

  CHECK(post_dataset(store, "y,t\n1,0\n2,1\n", std::string("{not json")).status == 400);
  CHECK(post_dataset(store, "y,t\n1,0\n2,1\n", std::string(R"({"treatment_column":"t"})")).status == 400);
  CHECK(post_dataset(store, "y,t\n1,0\n2,1\n", std::string(R"({"treatment_column":"t","outcome_columns":["y"]})"))
            .status == 200);
  CHECK(post_dataset(store, "a,b\n1\n", std::nullopt).status == 400);
}

TEST_CASE("oversize uploads are refused") {
  auto store = make_store(16);
  const auto r = post_dataset(store, std::string(17, 'x'), std::nullopt);
  CHECK(r.status == 413);
  CHECK(json::parse(r.body)["code"] == "payload_too_large");
}

TEST_CASE("decompose status codes") {
  auto store = make_store();
  const json ttest = {{"treatment_column", "t"}, {"outcome_columns", {"y"}}, {"regression_template", "ttest"}};
  const auto flat = upload(store, kFlatCsv);

  SUBCASE("identical datasets give zero components") {
    const auto r = post_decompose(store, decompose_body(flat, flat, ttest), 1);
    REQUIRE(r.status == 200);
    const auto doc = parse_result(r.body);
    CHECK(doc.observed.estimate == doctest::Approx(0).epsilon(1e-12));
    for (const auto& c : doc.decomposition) CHECK(std::abs(c.estimate) <= 1e-10);
  }
  SUBCASE("unknown ids") {
    const auto r = post_decompose(store, decompose_body(flat, "ffffffffffffffffffffffffffffffff", ttest), 1);
    CHECK(r.status == 404);
    const auto j = json::parse(r.body);
    CHECK(j["code"] == "not_found");
    CHECK(j["detail"] == "ffffffffffffffffffffffffffffffff");
  }
  SUBCASE("selection event did not occur") {
    const auto r = post_decompose(store, decompose_body(flat, flat, ttest, {{"selection", {{"alpha0", 0.05}}}}), 1);
    CHECK(r.status == 409);
    CHECK(json::parse(r.body)["code"] == "selection");
  }
  SUBCASE("infeasible covariate balance names the level") {
    const auto a = upload(store, grouped_csv(true));
    const auto b = upload(store, grouped_csv(false));
    json spec = ttest;
    spec["covariate_moments"] = {{{"column", "g"}, {"moment", "one_hot"}}};
    spec["categorical_levels"] = {{"g", {"a", "b"}}};
    const auto r = post_decompose(store, decompose_body(a, b, spec), 1);
    CHECK(r.status == 422);
    const auto j = json::parse(r.body);
    CHECK(j["code"] == "infeasible");
    CHECK(j["detail"] == "g=b");
  }
  SUBCASE("malformed requests") {
    CHECK(post_decompose(store, "{", 1).status == 400);
    CHECK(post_decompose(store, "[]", 1).status == 400);
    CHECK(post_decompose(store, json{{"original_id", flat}, {"replication_id", flat}}.dump(), 1).status == 400);
    CHECK(post_decompose(store, json{{"original_id", 1}, {"replication_id", flat}, {"spec", ttest}}.dump(), 1)
              .status == 400);
    json bad = ttest;
    bad["outcome_columns"] = {"nope"};
    CHECK(post_decompose(store, decompose_body(flat, flat, bad), 1).status == 400);
    CHECK(post_decompose(store, decompose_body(flat, flat, ttest, {{"level", "high"}}), 1).status == 400);
  }
}

TEST_CASE("service output matches the library pipeline byte for byte") {
  auto store = make_store(1 << 24, 1 << 26);
  const auto a = upload(store, fixture("example1/original.csv"));
  const auto b = upload(store, fixture("example1/replication.csv"));
  const json spec = json::parse(fixture("example1/spec.json"));
  const auto r = post_decompose(store, decompose_body(a, b, spec), 2);
  REQUIRE(r.status == 200);

  const auto s = load_analysis_spec(SHIFTDIAG_FIXTURES "/example1/spec.json");
  const auto d1 = load_dataset(SHIFTDIAG_FIXTURES "/example1/original.csv", s, StudyRole::kOriginal);
  const auto d2 = load_dataset(SHIFTDIAG_FIXTURES "/example1/replication.csv", s, StudyRole::kReplication);
  CHECK(r.body == serialize(run_pipeline(d1, d2, s).document));
}

TEST_CASE("parallel decompositions agree with serial ones") {
  auto store = make_store(1 << 24, 1 << 26);
  const auto a = upload(store, fixture("example1/original.csv"));
  const auto b = upload(store, fixture("example1/replication.csv"));
  const auto c = upload(store, fixture("example2/original.csv"));
  const auto d = upload(store, fixture("example2/replication.csv"));
  const json s1 = json::parse(fixture("example1/spec.json"));
  const json s2 = json::parse(fixture("example2/spec.json"));
  const std::string bodies[2] = {decompose_body(a, b, s1), decompose_body(c, d, s2)};
  const std::string serial[2] = {post_decompose(store, bodies[0], 1).body, post_decompose(store, bodies[1], 1).body};

  std::vector<std::future<ApiResponse>> jobs;
  for (int i = 0; i < 16; ++i)
    jobs.push_back(std::async(std::launch::async, [&, i] { return post_decompose(store, bodies[i % 2], 1); }));
  for (int i = 0; i < 16; ++i) {
    const auto r = jobs[i].get();
    CHECK(r.status == 200);
    CHECK(r.body == serial[i % 2]);
  }
}

TEST_CASE("http front end") {
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.max_body_bytes = 1 << 20;
  cfg.workers = 4;
  ApiServer server(cfg);
  const int port = server.bind();
  std::thread loop([&] { server.serve(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(std::chrono::seconds(60));

  auto health = cli.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");
  CHECK(json::parse(health->body)["datasets"] == 0);

  auto version = cli.Get("/api/version");
  REQUIRE(version);
  CHECK(json::parse(version->body)["version"] == engine_version());

  auto missing = cli.Get("/api/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["code"] == "not_found");

  const std::string spec_fragment = R"({"treatment_column":"t","outcome_columns":["y"]})";
  httplib::MultipartFormDataItems items = {{"file", kFlatCsv, "flat.csv", "text/csv"},
                                           {"spec", spec_fragment, "", "application/json"}};
  auto up = cli.Post("/api/datasets", items);
  REQUIRE(up);
  CHECK(up->status == 200);
  const std::string id = json::parse(up->body)["id"];
  CHECK(server.store().size() == 1);

  auto not_multipart = cli.Post("/api/datasets", kFlatCsv, "text/csv");
  REQUIRE(not_multipart);
  CHECK(not_multipart->status == 400);

  httplib::MultipartFormDataItems big = {{"file", std::string(2 << 20, '1'), "big.csv", "text/csv"}};
  auto too_big = cli.Post("/api/datasets", big);
  if (too_big) {
    CHECK(too_big->status == 413);
    CHECK(json::parse(too_big->body)["code"] == "payload_too_large");
  }

  const json ttest = {{"treatment_column", "t"}, {"outcome_columns", {"y"}}, {"regression_template", "ttest"}};
  auto dec = cli.Post("/api/decompose", decompose_body(id, id, ttest), "application/json");
  REQUIRE(dec);
  CHECK(dec->status == 200);
  CHECK(parse_result(dec->body).decomposition.size() == 3);  // no mediators

  server.stop();
  loop.join();
}
