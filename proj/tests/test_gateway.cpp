#include "imhs/error.hpp"
#include "imhs/gateway.hpp"
#include "imhs/text.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <thread>

using namespace imhs;
using namespace imhs::gateway;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(IMHS_BINARY_DIR) / "test-scratch" / "gateway";
  std::filesystem::create_directories(dir);
  return dir / name;
}

ChatRequest sample_request(std::string user = "Please determine if hello is (A) implicit hate speech or (B) neutral speech.") {
  return {"Please answer the question strictly according to the given instructions.", std::move(user), "m-1", 0.0, 64};
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an imhs::Error");
  return ErrorKind::Parse;
}

// Local OpenAI-style server on an ephemeral port.
class LocalServer {
public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  [[nodiscard]] std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

class ScriptedTransport final : public HttpTransport {
public:
  explicit ScriptedTransport(std::vector<HttpResponse> script) : script_(std::move(script)) {}
  HttpResponse post(const std::string&, const std::string&, const Headers&) override {
    if (next_ >= script_.size()) throw Error(ErrorKind::HttpError, "script exhausted");
    const auto r = script_[next_++];
    if (r.status == 0) throw Error(ErrorKind::HttpError, "timeout");
    return r;
  }
  [[nodiscard]] std::size_t used() const { return next_; }

private:
  std::vector<HttpResponse> script_;
  std::size_t next_ = 0;
};

class FixedProvider final : public EmbeddingProvider {
public:
  FixedProvider(std::size_t declared, Eigen::VectorXd value) : declared_(declared), value_(std::move(value)) {}
  [[nodiscard]] const std::string& provider_id() const override { return id_; }
  [[nodiscard]] std::size_t dim() const override { return declared_; }
  EmbeddingVector embed(std::string_view) override { return {value_, id_}; }

private:
  std::string id_ = "fixed";
  std::size_t declared_;
  Eigen::VectorXd value_;
};

RetryPolicy no_sleep(std::vector<std::chrono::milliseconds>* delays = nullptr) {
  RetryPolicy p;
  p.sleep = [delays](std::chrono::milliseconds d) {
    if (delays) delays->push_back(d);
  };
  return p;
}

}  // namespace

TEST_CASE("request hash is stable and field-sensitive") {
  auto a = sample_request();
  CHECK(request_hash(a) == request_hash(sample_request()));
  CHECK(request_hash(a).size() == 64);
  auto b = a;
  b.temperature = 0.5;
  CHECK(request_hash(a) != request_hash(b));
  b = a;
  b.model_id = "m-2";
  CHECK(request_hash(a) != request_hash(b));
  auto parsed = nlohmann::json::parse(canonical_json(a));
  CHECK(parsed.at("model_id") == "m-1");
  CHECK(canonical_json(a).find("\"max_tokens\"") < canonical_json(a).find("\"system\""));
}

TEST_CASE("chat completion body and response parsing") {
  auto body = nlohmann::json::parse(chat_completion_body(sample_request()));
  CHECK(body.at("model") == "m-1");
  CHECK(body.at("messages").size() == 2);
  CHECK(body.at("messages")[0].at("role") == "system");
  CHECK(body.at("messages")[1].at("role") == "user");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("max_tokens") == 64);

  CHECK(parse_chat_completion(R"j({"choices":[{"message":{"role":"assistant","content":"(A)"}}]})j") == "(A)");
  CHECK(kind_of([] { parse_chat_completion(R"({"choices":[]})"); }) == ErrorKind::MalformedResponse);
  CHECK(kind_of([] { parse_chat_completion("not json"); }) == ErrorKind::MalformedResponse);
}

TEST_CASE("replay store round-trip and miss") {
  auto store = std::make_shared<ReplayStore>();
  auto req = sample_request();
  store->put({request_hash(req), "(B) neutral speech.", req.model_id});
  auto path = scratch("replay.jsonl");
  store->save(path);

  auto loaded = ReplayStore::load(path);
  CHECK(loaded->size() == 1);
  CHECK(loaded->to_jsonl() == store->to_jsonl());
  ReplayChatProvider replay(loaded);
  CHECK(replay.chat(req) == "(B) neutral speech.");
  CHECK(kind_of([&] { replay.chat(sample_request("unseen")); }) == ErrorKind::ReplayMiss);

  store->put({request_hash(req), "(A)", req.model_id});
  CHECK(store->lookup(request_hash(req)) == "(A)");
  CHECK(store->size() == 1);
}

TEST_CASE("retry policy") {
  SUBCASE("transient failures are retried with growing delays") {
    std::vector<std::chrono::milliseconds> delays;
    ScriptedTransport t({{503, ""}, {0, ""}, {429, ""}, {200, "ok"}});
    CHECK(post_with_retry(t, "u", "b", {}, no_sleep(&delays)) == "ok");
    CHECK(t.used() == 4);
    REQUIRE(delays.size() == 3);
    CHECK(delays[0] < delays[1]);
    CHECK(delays[1] < delays[2]);
  }
  SUBCASE("exhaustion raises HttpError") {
    ScriptedTransport t({{500, ""}, {500, ""}, {500, ""}, {500, ""}, {200, "late"}});
    CHECK(kind_of([&] { post_with_retry(t, "u", "b", {}, no_sleep()); }) == ErrorKind::HttpError);
    CHECK(t.used() == 4);
  }
  SUBCASE("client errors are not retried") {
    ScriptedTransport t({{400, "bad"}, {200, "ok"}});
    CHECK(kind_of([&] { post_with_retry(t, "u", "b", {}, no_sleep()); }) == ErrorKind::HttpError);
    CHECK(t.used() == 1);
  }
}

TEST_CASE("http chat against a local server, recorded then replayed") {
  LocalServer srv;
  std::string seen_auth, seen_path;
  nlohmann::json seen_body;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_path = req.path;
    seen_body = nlohmann::json::parse(req.body);
    nlohmann::json reply = {{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", "(A) yes"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  ::setenv("IMHS_TEST_TOKEN", "sk-local", 1);

  auto recorder = std::make_shared<ReplayStore>();
  auto transport = std::make_shared<CountingTransport>(make_http_transport(std::chrono::seconds(5)));
  HttpChatOptions opts{srv.base_url() + "/v1", "IMHS_TEST_TOKEN", no_sleep(), 2};
  HttpChatProvider http(opts, transport, recorder);
  auto req = sample_request();
  CHECK(http.chat(req) == "(A) yes");
  CHECK(transport->calls() == 1);
  CHECK(seen_path == "/v1/chat/completions");
  CHECK(seen_auth == "Bearer sk-local");
  CHECK(seen_body.at("messages")[1].at("content") == req.user);

  ReplayChatProvider replay(recorder);
  CHECK(replay.chat(req) == "(A) yes");
  CHECK(transport->calls() == 1);
}

TEST_CASE("http transport reports refused connections as HttpError") {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto transport = make_http_transport(std::chrono::milliseconds(500));
  HttpChatOptions opts{"http://127.0.0.1:" + std::to_string(port), "", no_sleep(), 1};
  opts.retry.max_retries = 1;
  HttpChatProvider http(opts, transport);
  CHECK(kind_of([&] { http.chat(sample_request()); }) == ErrorKind::HttpError);
}

TEST_CASE("http embedding contract") {
  LocalServer srv;
  srv.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    const std::string input = body.at("input");
    std::vector<double> v(4, 0.0);
    v[input.size() % 4] = 1.0;
    if (input == "short") v.pop_back();
    nlohmann::json reply = {{"object", "list"}, {"model", body.at("model")}, {"data", {{{"index", 0}, {"embedding", v}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  HttpEmbeddingOptions opts;
  opts.base_url = srv.base_url();
  opts.model = "toy";
  opts.provider_id = "toy-l2";
  opts.dim = 4;
  opts.retry = no_sleep();
  auto transport = std::make_shared<CountingTransport>(make_http_transport(std::chrono::seconds(5)));
  auto http = std::make_shared<HttpEmbeddingProvider>(opts, transport);
  auto cache = std::make_shared<EmbeddingCache>();
  CachedEmbeddingProvider cached(http, cache);

  auto v = cached.embed("abc");
  CHECK(v.dim() == 4);
  CHECK(v.values(3) == 1.0);
  CHECK(v.provider_id == "toy-l2");
  CHECK(cached.embed("abc").values == v.values);
  CHECK(transport->calls() == 1);
  CHECK(cached.backend_calls() == 1);
  CHECK(kind_of([&] { cached.embed("short"); }) == ErrorKind::DimDrift);
}

TEST_CASE("dump provider") {
  std::vector<DumpEntry> entries;
  for (int i = 0; i < 5; ++i) {
    DumpEntry e{text_hash("text " + std::to_string(i)), std::vector<float>(8)};
    for (int k = 0; k < 8; ++k) e.values[k] = float(i) + 0.125f * float(k);
    entries.push_back(e);
  }
  auto path = scratch("toy.dump.jsonl");
  write_file(path, dump_to_jsonl("toy", 8, entries));
  auto dump = DumpEmbeddingProvider::load(path);
  CHECK(dump->dim() == 8);
  CHECK(dump->provider_id() == "toy");

  auto v = dump->embed("text 3");
  CHECK(v.dim() == 8);
  CHECK(v.values(1) == 3.125);
  CHECK(kind_of([&] { dump->embed("absent"); }) == ErrorKind::DumpMiss);

  SUBCASE("cache serves repeats without touching the dump") {
    auto cached = CachedEmbeddingProvider(dump, std::make_shared<EmbeddingCache>());
    const auto before = dump->calls();
    auto a = cached.embed("text 1");
    auto b = cached.embed("text 1");
    CHECK(dump->calls() == before + 1);
    CHECK(a.values == b.values);
  }
  SUBCASE("row with the wrong length is DimDrift") {
    auto text = dump_to_jsonl("toy", 8, entries);
    auto lines = split_lines(text);
    auto row = nlohmann::json::parse(lines[2]);
    row["values"].erase(row["values"].begin());
    lines[2] = row.dump();
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    write_file(scratch("drift.dump.jsonl"), out);
    CHECK(kind_of([] { DumpEmbeddingProvider::load(scratch("drift.dump.jsonl")); }) == ErrorKind::DimDrift);
  }
  SUBCASE("dump written by an external tool loads") {
    // Header then rows, keys in arbitrary order, values as plain JSON numbers.
    std::string ext = "{\"count\": 1, \"dim\": 3, \"provider_id\": \"gpt2-l12\"}\n";
    ext += "{\"values\": [0.5, -1, 2e-3], \"text_sha256\": \"" + text_hash("hi") + "\"}\n";
    write_file(scratch("ext.dump.jsonl"), ext);
    auto p = DumpEmbeddingProvider::load(scratch("ext.dump.jsonl"));
    CHECK(p->embed("hi").values == Eigen::Vector3d(0.5, -1, 2e-3));
  }
}

TEST_CASE("cache contract") {
  EmbeddingCache cache;
  auto k = embedding_cache_key("p", "t");
  CHECK_FALSE(cache.get(k).has_value());
  cache.put(k, {Eigen::Vector2d(1, 2), "p"});
  CHECK(cache.get(k)->values == Eigen::Vector2d(1, 2));
  cache.put(k, {Eigen::Vector2d(3, 4), "p"});
  CHECK(cache.get(k)->values == Eigen::Vector2d(3, 4));
  CHECK(cache.size() == 1);
  CHECK_FALSE(cache.get(embedding_cache_key("q", "t")).has_value());
  CHECK(embedding_cache_key("p", "e\xCC\x81") == embedding_cache_key("p", "\xC3\xA9"));
}

TEST_CASE("validation rejects short and non-finite vectors") {
  auto cache = std::make_shared<EmbeddingCache>();
  CachedEmbeddingProvider short_one(std::make_shared<FixedProvider>(8, Eigen::VectorXd::Ones(7)), cache);
  CHECK(kind_of([&] { short_one.embed("x"); }) == ErrorKind::DimDrift);
  Eigen::VectorXd bad = Eigen::VectorXd::Ones(8);
  bad(3) = std::numeric_limits<double>::quiet_NaN();
  CachedEmbeddingProvider nan_one(std::make_shared<FixedProvider>(8, bad), std::make_shared<EmbeddingCache>());
  CHECK(kind_of([&] { nan_one.embed("x"); }) == ErrorKind::DimDrift);
}

TEST_CASE("in-flight limit bounds concurrency") {
  InFlightLimit limit(2);
  std::atomic<int> now{0}, peak{0};
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      limit.run([&] {
        int v = ++now;
        int p = peak.load();
        while (v > p && !peak.compare_exchange_weak(p, v)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --now;
        return 0;
      });
    });
  }
  threads.clear();
  CHECK(peak.load() <= 2);
}
