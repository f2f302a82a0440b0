#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

namespace imhs::gateway {

// ---------------------------------------------------------------- transport

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Minimal POST-only transport. Throws Error(HttpError) when no response
/// arrives at all (connection refused, timeout).
class HttpTransport {
public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body, const Headers& headers) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout = std::chrono::seconds(60));

/// Counts every request that reaches the wrapped transport.
class CountingTransport final : public HttpTransport {
public:
  explicit CountingTransport(std::shared_ptr<HttpTransport> inner) : inner_(std::move(inner)) {}

  HttpResponse post(const std::string& url, const std::string& body, const Headers& headers) override {
    ++calls_;
    return inner_->post(url, body, headers);
  }

  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

private:
  std::shared_ptr<HttpTransport> inner_;
  std::atomic<std::size_t> calls_{0};
};

struct RetryPolicy {
  /// Retries after the first attempt, for timeouts, 429 and 5xx.
  int max_retries = 3;
  std::chrono::milliseconds base_delay{250};
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

/// Bounds the number of concurrent in-flight requests.
class InFlightLimit {
public:
  explicit InFlightLimit(std::ptrdiff_t bound = 4) : slots_(bound) {}

  template <typename F>
  auto run(F&& f) {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};
    return f();
  }

private:
  std::counting_semaphore<> slots_;
};

// --------------------------------------------------------------------- chat

struct ChatRequest {
  std::string system;
  std::string user;
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 64;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

/// Sorted-key compact JSON of the request; the input to request_hash.
std::string canonical_json(const ChatRequest& req);
std::string request_hash(const ChatRequest& req);

/// OpenAI-compatible chat-completion body for the request.
std::string chat_completion_body(const ChatRequest& req);
/// Text of the first choice; throws Error(MalformedResponse).
std::string parse_chat_completion(std::string_view body);

class ChatProvider {
public:
  virtual ~ChatProvider() = default;
  virtual std::string chat(const ChatRequest& req) = 0;
};

struct ReplayRecord {
  std::string request_hash;
  std::string response_text;
  std::string model_id;
};

/// Request-hash -> response store backed by a JSONL file.
class ReplayStore {
public:
  ReplayStore() = default;
  static std::shared_ptr<ReplayStore> load(const std::filesystem::path& path);

  [[nodiscard]] std::optional<std::string> lookup(const std::string& hash) const;
  void put(ReplayRecord record);
  [[nodiscard]] std::size_t size() const;
  /// Records sorted by hash, one JSON object per line.
  [[nodiscard]] std::string to_jsonl() const;
  void save(const std::filesystem::path& path) const;

private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, ReplayRecord> records_;
};

class ReplayChatProvider final : public ChatProvider {
public:
  explicit ReplayChatProvider(std::shared_ptr<const ReplayStore> store) : store_(std::move(store)) {}
  std::string chat(const ChatRequest& req) override;

private:
  std::shared_ptr<const ReplayStore> store_;
};

struct HttpChatOptions {
  std::string base_url;
  /// Name of the environment variable holding the bearer token.
  std::string api_key_env = "OPENAI_API_KEY";
  RetryPolicy retry;
  std::ptrdiff_t max_in_flight = 4;
};

class HttpChatProvider final : public ChatProvider {
public:
  HttpChatProvider(HttpChatOptions options, std::shared_ptr<HttpTransport> transport,
                   std::shared_ptr<ReplayStore> recorder = nullptr);
  std::string chat(const ChatRequest& req) override;

private:
  HttpChatOptions options_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<ReplayStore> recorder_;
  InFlightLimit limit_;
};

/// POST with the retry policy applied; returns the 2xx body or throws HttpError.
std::string post_with_retry(HttpTransport& transport, const std::string& url, const std::string& body,
                            const Headers& headers, const RetryPolicy& retry);

// --------------------------------------------------------------- embeddings

struct EmbeddingVector {
  Eigen::VectorXd values;
  std::string provider_id;

  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(values.size()); }
};

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  [[nodiscard]] virtual const std::string& provider_id() const = 0;
  [[nodiscard]] virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed(std::string_view text) = 0;
};

/// Offline provider over a dump file: header line
/// {"provider_id","dim","count"} then {"text_sha256","values"} lines.
class DumpEmbeddingProvider final : public EmbeddingProvider {
public:
  static std::shared_ptr<DumpEmbeddingProvider> load(const std::filesystem::path& path);
  DumpEmbeddingProvider(std::string provider_id, std::size_t dim,
                        std::unordered_map<std::string, Eigen::VectorXd> vectors);

  [[nodiscard]] const std::string& provider_id() const override { return provider_id_; }
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  EmbeddingVector embed(std::string_view text) override;
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

private:
  std::string provider_id_;
  std::size_t dim_;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
  std::atomic<std::size_t> calls_{0};
};

struct DumpEntry {
  std::string text_sha256;
  std::vector<float> values;
};

/// Writes the dump format; values are stored as 32-bit floats.
std::string dump_to_jsonl(const std::string& provider_id, std::size_t dim, const std::vector<DumpEntry>& entries);

struct HttpEmbeddingOptions {
  std::string base_url;
  std::string model;
  std::string provider_id;
  std::size_t dim = 0;
  std::string api_key_env = "OPENAI_API_KEY";
  RetryPolicy retry;
  std::ptrdiff_t max_in_flight = 4;
};

/// OpenAI-style `POST /v1/embeddings` with {"model","input"}; reads
/// data[0].embedding.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
  HttpEmbeddingProvider(HttpEmbeddingOptions options, std::shared_ptr<HttpTransport> transport);

  [[nodiscard]] const std::string& provider_id() const override { return options_.provider_id; }
  [[nodiscard]] std::size_t dim() const override { return options_.dim; }
  EmbeddingVector embed(std::string_view text) override;

private:
  HttpEmbeddingOptions options_;
  std::shared_ptr<HttpTransport> transport_;
  InFlightLimit limit_;
};

struct CacheKey {
  std::string provider_id;
  std::string payload_hash;

  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

CacheKey embedding_cache_key(std::string_view provider_id, std::string_view text);

/// Concurrent readers, serialized writers, last write wins.
class EmbeddingCache {
public:
  void put(const CacheKey& key, EmbeddingVector value);
  [[nodiscard]] std::optional<EmbeddingVector> get(const CacheKey& key) const;
  [[nodiscard]] std::size_t size() const;

private:
  mutable std::shared_mutex mutex_;
  std::map<CacheKey, EmbeddingVector> entries_;
};

/// Cache in front of a backend; every vector it returns has the declared
/// dim and only finite values.
class CachedEmbeddingProvider final : public EmbeddingProvider {
public:
  CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> backend, std::shared_ptr<EmbeddingCache> cache);

  [[nodiscard]] const std::string& provider_id() const override { return backend_->provider_id(); }
  [[nodiscard]] std::size_t dim() const override { return backend_->dim(); }
  EmbeddingVector embed(std::string_view text) override;
  [[nodiscard]] std::size_t backend_calls() const noexcept { return backend_calls_.load(); }

private:
  std::shared_ptr<EmbeddingProvider> backend_;
  std::shared_ptr<EmbeddingCache> cache_;
  std::atomic<std::size_t> backend_calls_{0};
};

void validate_embedding(const EmbeddingVector& v, std::size_t declared_dim);

}  // namespace imhs::gateway
