#include "imhs/gateway.hpp"

#include "imhs/error.hpp"
#include "imhs/text.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <sstream>

namespace imhs::gateway {

namespace {

bool transient(int status) { return status == 429 || status >= 500; }

Headers auth_headers(const std::string& api_key_env) {
  Headers headers{{"Content-Type", "application/json"}};
  if (!api_key_env.empty()) {
    if (const char* token = std::getenv(api_key_env.c_str()); token != nullptr && *token != '\0') {
      headers.emplace_back("Authorization", std::string("Bearer ") + token);
    }
  }
  return headers;
}

std::string join_url(const std::string& base, std::string_view path) {
  std::string out = base;
  while (!out.empty() && out.back() == '/') out.pop_back();
  // Accept base URLs given with or without the /v1 prefix.
  if (out.size() >= 3 && out.compare(out.size() - 3, 3, "/v1") == 0 && path.starts_with("/v1")) {
    path.remove_prefix(3);
  }
  return out + std::string(path);
}

}  // namespace

std::string post_with_retry(HttpTransport& transport, const std::string& url, const std::string& body,
                            const Headers& headers, const RetryPolicy& retry) {
  std::string last_failure;
  for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
    if (attempt > 0 && retry.sleep) {
      retry.sleep(retry.base_delay * (1 << (attempt - 1)));
    }
    HttpResponse response;
    try {
      response = transport.post(url, body, headers);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::HttpError) throw;
      last_failure = e.what();
      continue;
    }
    if (response.status >= 200 && response.status < 300) {
      return response.body;
    }
    last_failure = "status " + std::to_string(response.status) + " from " + url;
    if (!transient(response.status)) break;
  }
  throw Error(ErrorKind::HttpError, last_failure);
}

// --------------------------------------------------------------------- chat

std::string canonical_json(const ChatRequest& req) {
  nlohmann::json j;  // std::map-backed, so keys serialize sorted
  j["system"] = req.system;
  j["user"] = req.user;
  j["model_id"] = req.model_id;
  j["temperature"] = req.temperature;
  j["max_tokens"] = req.max_tokens;
  return j.dump();
}

std::string request_hash(const ChatRequest& req) { return sha256_hex(canonical_json(req)); }

std::string chat_completion_body(const ChatRequest& req) {
  nlohmann::ordered_json j;
  j["model"] = req.model_id;
  j["messages"] = nlohmann::ordered_json::array({
      {{"role", "system"}, {"content", req.system}},
      {{"role", "user"}, {"content", req.user}},
  });
  j["temperature"] = req.temperature;
  j["max_tokens"] = req.max_tokens;
  return j.dump();
}

std::string parse_chat_completion(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) {
      throw Error(ErrorKind::MalformedResponse, "choices[0].message.content is not a string");
    }
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedResponse, std::string("chat completion: ") + e.what());
  }
}

std::shared_ptr<ReplayStore> ReplayStore::load(const std::filesystem::path& path) {
  auto store = std::make_shared<ReplayStore>();
  int line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      store->put({j.at("request_hash").get<std::string>(), j.at("response_text").get<std::string>(),
                 j.value("model_id", std::string{})});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

std::optional<std::string> ReplayStore::lookup(const std::string& hash) const {
  std::shared_lock lock(mutex_);
  auto it = records_.find(hash);
  if (it == records_.end()) return std::nullopt;
  return it->second.response_text;
}

void ReplayStore::put(ReplayRecord record) {
  std::unique_lock lock(mutex_);
  auto key = record.request_hash;
  records_.insert_or_assign(std::move(key), std::move(record));
}

std::size_t ReplayStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::string ReplayStore::to_jsonl() const {
  std::shared_lock lock(mutex_);
  std::string out;
  for (const auto& [_, r] : records_) {
    nlohmann::ordered_json j;
    j["request_hash"] = r.request_hash;
    j["response_text"] = r.response_text;
    j["model_id"] = r.model_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void ReplayStore::save(const std::filesystem::path& path) const { write_file(path, to_jsonl()); }

std::string ReplayChatProvider::chat(const ChatRequest& req) {
  const auto hash = request_hash(req);
  if (auto hit = store_->lookup(hash)) return *hit;
  throw Error(ErrorKind::ReplayMiss, "no recorded response for request " + hash);
}

HttpChatProvider::HttpChatProvider(HttpChatOptions options, std::shared_ptr<HttpTransport> transport,
                                   std::shared_ptr<ReplayStore> recorder)
    : options_(std::move(options)),
      transport_(std::move(transport)),
      recorder_(std::move(recorder)),
      limit_(options_.max_in_flight) {}

std::string HttpChatProvider::chat(const ChatRequest& req) {
  if (trim(req.system).empty() || trim(req.user).empty()) {
    throw Error(ErrorKind::InvalidConfig, "chat request needs nonempty system and user text");
  }
  if (!(req.temperature >= 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "chat temperature must be >= 0");
  }
  const std::string body = limit_.run([&] {
    return post_with_retry(*transport_, join_url(options_.base_url, "/v1/chat/completions"), chat_completion_body(req),
                           auth_headers(options_.api_key_env), options_.retry);
  });
  std::string text = parse_chat_completion(body);
  if (recorder_) {
    recorder_->put({request_hash(req), text, req.model_id});
  }
  return text;
}

// --------------------------------------------------------------- embeddings

void validate_embedding(const EmbeddingVector& v, std::size_t declared_dim) {
  if (v.dim() != declared_dim) {
    throw Error(ErrorKind::DimDrift, "provider '" + v.provider_id + "' returned " + std::to_string(v.dim()) +
                                         " values, declared dim " + std::to_string(declared_dim));
  }
  if (!v.values.allFinite()) {
    throw Error(ErrorKind::DimDrift, "provider '" + v.provider_id + "' returned non-finite values");
  }
}

DumpEmbeddingProvider::DumpEmbeddingProvider(std::string provider_id, std::size_t dim,
                                             std::unordered_map<std::string, Eigen::VectorXd> vectors)
    : provider_id_(std::move(provider_id)), dim_(dim), vectors_(std::move(vectors)) {}

std::shared_ptr<DumpEmbeddingProvider> DumpEmbeddingProvider::load(const std::filesystem::path& path) {
  const auto lines = split_lines(read_file(path));
  if (lines.empty()) {
    throw Error(ErrorKind::Parse, path.string() + " has no header line");
  }
  try {
    const auto header = nlohmann::json::parse(lines[0]);
    const auto provider_id = header.at("provider_id").get<std::string>();
    const auto dim = header.at("dim").get<std::size_t>();
    const auto count = header.at("count").get<std::size_t>();
    std::unordered_map<std::string, Eigen::VectorXd> vectors;
    std::size_t rows = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      const auto j = nlohmann::json::parse(lines[i]);
      const auto values = j.at("values").get<std::vector<double>>();
      if (values.size() != dim) {
        throw Error(ErrorKind::DimDrift, path.string() + ":" + std::to_string(i + 1) + " has " +
                                             std::to_string(values.size()) + " values, header dim " + std::to_string(dim));
      }
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(dim));
      vectors.insert_or_assign(j.at("text_sha256").get<std::string>(), std::move(v));
      ++rows;
    }
    if (rows != count) {
      throw Error(ErrorKind::Parse, path.string() + " header count " + std::to_string(count) + " but " +
                                        std::to_string(rows) + " rows");
    }
    return std::make_shared<DumpEmbeddingProvider>(provider_id, dim, std::move(vectors));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

EmbeddingVector DumpEmbeddingProvider::embed(std::string_view text) {
  ++calls_;
  const auto hash = text_hash(text);
  auto it = vectors_.find(hash);
  if (it == vectors_.end()) {
    throw Error(ErrorKind::DumpMiss, "no vector for text hash " + hash);
  }
  return {it->second, provider_id_};
}

std::string dump_to_jsonl(const std::string& provider_id, std::size_t dim, const std::vector<DumpEntry>& entries) {
  nlohmann::ordered_json header;
  header["provider_id"] = provider_id;
  header["dim"] = dim;
  header["count"] = entries.size();
  std::string out = header.dump() + "\n";
  for (const auto& e : entries) {
    if (e.values.size() != dim) {
      throw Error(ErrorKind::DimDrift, "dump entry " + e.text_sha256 + " has " + std::to_string(e.values.size()) +
                                           " values, header dim " + std::to_string(dim));
    }
    nlohmann::ordered_json j;
    j["text_sha256"] = e.text_sha256;
    j["values"] = e.values;
    out += j.dump();
    out += '\n';
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingOptions options, std::shared_ptr<HttpTransport> transport)
    : options_(std::move(options)), transport_(std::move(transport)), limit_(options_.max_in_flight) {}

EmbeddingVector HttpEmbeddingProvider::embed(std::string_view text) {
  nlohmann::ordered_json req;
  req["model"] = options_.model;
  req["input"] = nfc(text);
  const std::string body = limit_.run([&] {
    return post_with_retry(*transport_, join_url(options_.base_url, "/v1/embeddings"), req.dump(),
                           auth_headers(options_.api_key_env), options_.retry);
  });
  try {
    const auto j = nlohmann::json::parse(body);
    const auto values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    return {Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())),
            options_.provider_id};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedResponse, std::string("embedding response: ") + e.what());
  }
}

CacheKey embedding_cache_key(std::string_view provider_id, std::string_view text) {
  return {std::string(provider_id), text_hash(text)};
}

void EmbeddingCache::put(const CacheKey& key, EmbeddingVector value) {
  std::unique_lock lock(mutex_);
  entries_.insert_or_assign(key, std::move(value));
}

std::optional<EmbeddingVector> EmbeddingCache::get(const CacheKey& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

CachedEmbeddingProvider::CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> backend,
                                                 std::shared_ptr<EmbeddingCache> cache)
    : backend_(std::move(backend)), cache_(std::move(cache)) {}

EmbeddingVector CachedEmbeddingProvider::embed(std::string_view text) {
  const auto key = embedding_cache_key(backend_->provider_id(), text);
  if (auto hit = cache_->get(key)) return *hit;
  ++backend_calls_;
  EmbeddingVector v = backend_->embed(text);
  validate_embedding(v, backend_->dim());
  cache_->put(key, v);
  return v;
}

}  // namespace imhs::gateway
