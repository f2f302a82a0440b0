#include "imhs/runner.hpp"

#include "imhs/error.hpp"
#include "imhs/metrics.hpp"
#include "imhs/prompt.hpp"
#include "imhs/text.hpp"

#include <json.hpp>

#include <atomic>
#include <ctime>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

namespace imhs::runner {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

Method parse_method(std::string_view s) {
  if (s == "prompt") return Method::Prompt;
  if (s == "embed") return Method::Embed;
  throw Error(ErrorKind::InvalidConfig, "unknown method '" + std::string(s) + "'");
}

std::vector<kb::InfoCombo> all_combos_with_baseline() {
  std::vector<kb::InfoCombo> out{kb::InfoCombo{}};
  for (auto c : kb::enumerate_combos()) out.push_back(c);
  return out;
}

bool contains_combo(const std::vector<kb::InfoCombo>& combos, kb::InfoCombo c) {
  return std::find(combos.begin(), combos.end(), c) != combos.end();
}

void require_file(const fs::path& path, std::string_view what) {
  if (path.empty() || !fs::is_regular_file(path)) {
    throw Error(ErrorKind::MissingFile, std::string(what) + " '" + path.string() + "' does not exist");
  }
}

ordered_json row_to_json(const RunRow& r) {
  ordered_json j;
  j["dataset"] = r.dataset;
  j["model"] = r.model;
  j["provider_id"] = r.provider_id;
  j["method"] = r.method;
  j["strategy"] = r.strategy;
  j["combo"] = r.combo;
  j["f1_positive"] = r.f1_positive;
  j["f1_macro"] = r.f1_macro;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["abstain_rate"] = r.abstain_rate;
  j["scored"] = r.scored;
  j["unscored"] = r.unscored;
  j["seed"] = r.seed;
  j["status"] = r.status;
  j["note"] = r.note;
  j["started_at"] = r.started_at;
  j["finished_at"] = r.finished_at;
  return j;
}

RunRow row_from_json(const json& j) {
  RunRow r;
  r.dataset = j.at("dataset");
  r.model = j.at("model");
  r.provider_id = j.at("provider_id");
  r.method = j.at("method");
  r.strategy = j.at("strategy");
  r.combo = j.at("combo");
  r.f1_positive = j.at("f1_positive");
  r.f1_macro = j.at("f1_macro");
  r.precision = j.at("precision");
  r.recall = j.at("recall");
  r.abstain_rate = j.at("abstain_rate");
  r.scored = j.at("scored");
  r.unscored = j.at("unscored");
  r.seed = j.at("seed");
  r.status = j.at("status");
  r.note = j.at("note");
  r.started_at = j.value("started_at", "");
  r.finished_at = j.value("finished_at", "");
  return r;
}

/// Everything a cell needs, shared read-only across workers.
struct Context {
  const RunConfig& cfg;
  fs::path out;
  const corpus::Dataset& dataset;
  const kb::CodetypeSet& set;
  const corpus::SplitManifest& manifest;
  std::string manifest_checksum;
  std::shared_ptr<gateway::ChatProvider> chat;
  std::string chat_error;
  std::shared_ptr<gateway::EmbeddingProvider> embedding;
  std::string embedding_error;
  std::string dataset_name;
  std::string model;
};

void apply_metrics(RunRow& row, const std::vector<Label>& preds, const std::vector<Label>& golds) {
  const auto report = metrics::f1_from_counts(metrics::confusion(preds, golds));
  row.f1_positive = report.f1_positive;
  row.f1_macro = report.f1_macro;
  row.precision = report.precision;
  row.recall = report.recall;
  row.scored = preds.size();
}

void run_prompt_cell(const Context& ctx, const Cell& cell, RunRow& row, const fs::path& dir) {
  if (!ctx.chat) {
    throw Error(ErrorKind::InvalidConfig, "chat backend unavailable: " + ctx.chat_error);
  }
  row.provider_id = ctx.cfg.chat.model_id;
  const prompt::PromptOptions options{ctx.cfg.chat.model_id, ctx.cfg.chat.temperature, ctx.cfg.chat.max_tokens,
                                      ctx.cfg.abstain_label};
  const std::optional<kb::InfoCombo> combo =
      cell.combo.empty() ? std::nullopt : std::optional<kb::InfoCombo>(cell.combo);

  std::atomic<std::size_t> abstains{0};
  std::vector<Label> preds;
  std::vector<Label> golds;
  std::string log;
  std::map<std::string, std::size_t> failures;
  std::string first_failure;
  const auto& ids = ctx.manifest.test;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& inst = ctx.dataset.find(ids[i]);
    try {
      const auto outcome = prompt::classify_prompt(inst, combo, ctx.set, *ctx.chat, options, &abstains);
      preds.push_back(outcome.label);
      golds.push_back(inst.label);
      log += prompt::verdict_log_line(outcome);
      log += '\n';
    } catch (const Error& e) {
      ++failures[std::string(to_string(e.kind()))];
      if (first_failure.empty()) first_failure = inst.id + ": " + e.what();
      if (e.kind() == ErrorKind::HttpError) {
        // Retries are exhausted; the remaining instances stay unscored.
        failures["aborted"] += ids.size() - i - 1;
        break;
      }
    }
  }
  write_file(dir / "verdicts.jsonl", log);

  apply_metrics(row, preds, golds);
  row.abstain_rate = preds.empty() ? 0.0 : double(abstains.load()) / double(preds.size());
  row.unscored = ids.size() - preds.size();
  if (row.unscored > 0) {
    row.status = "error";
    std::string note;
    for (const auto& [kind, n] : failures) note += (note.empty() ? "" : "; ") + kind + "=" + std::to_string(n);
    row.note = note + " (first: " + first_failure + ")";
  }
}

void run_embed_cell(const Context& ctx, const Cell& cell, RunRow& row, const fs::path& dir) {
  if (!ctx.embedding) {
    throw Error(ErrorKind::InvalidConfig, "embedding backend unavailable: " + ctx.embedding_error);
  }
  row.provider_id = ctx.embedding->provider_id();
  std::optional<fusion::FeatureSpec> spec;
  if (cell.strategy) spec = fusion::FeatureSpec{cell.combo, *cell.strategy};

  auto train = fusion::featurize_split(ctx.manifest.train, ctx.dataset, ctx.set, spec, *ctx.embedding);
  auto val = fusion::featurize_split(ctx.manifest.val, ctx.dataset, ctx.set, spec, *ctx.embedding);
  auto test = fusion::featurize_split(ctx.manifest.test, ctx.dataset, ctx.set, spec, *ctx.embedding);
  fusion::write_matrix(train.matrix, dir / "train.csv");
  fusion::write_matrix(val.matrix, dir / "val.csv");
  fusion::write_matrix(test.matrix, dir / "test.csv");

  const auto trained = logreg::train(train.matrix.features, train.matrix.golds, val.matrix.features,
                                     val.matrix.golds, ctx.cfg.train);
  logreg::write_artifact({trained.model, row.provider_id, row.strategy, row.combo, ctx.manifest_checksum},
                         dir / "model.json");
  std::string log = "epoch,train_loss,val_f1\n";
  for (const auto& e : trained.log) {
    log += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," + format_double(e.val_f1) + "\n";
  }
  write_file(dir / "train_log.csv", log);

  apply_metrics(row, logreg::predict_all(trained.model, test.matrix.features), test.matrix.golds);
  row.unscored = test.missing.size();
  const auto missing = train.missing.size() + val.missing.size() + test.missing.size();
  if (missing > 0) {
    row.note = "dump_miss train=" + std::to_string(train.missing.size()) + " val=" +
               std::to_string(val.missing.size()) + " test=" + std::to_string(test.missing.size());
  }
}

RunRow run_cell(const Context& ctx, const Cell& cell) {
  RunRow row;
  row.dataset = ctx.dataset_name;
  row.model = ctx.model;
  row.method = std::string(to_string(cell.method));
  row.strategy = cell.strategy ? std::string(fusion::to_string(*cell.strategy)) : "-";
  row.combo = cell.combo.label();
  row.seed = ctx.manifest.seed;
  row.provider_id = cell.method == Method::Prompt ? ctx.cfg.chat.model_id
                                                  : (ctx.embedding ? ctx.embedding->provider_id() : "");
  const fs::path dir = ctx.out / "cells" / cell.id();
  const fs::path result_path = dir / "result.json";

  if (ctx.cfg.resume && fs::exists(result_path)) {
    try {
      auto previous = row_from_json(json::parse(read_file(result_path)));
      if (!previous.failed()) return previous;
    } catch (const std::exception&) {
      // Unreadable result: recompute the cell.
    }
  }

  fs::create_directories(dir);
  row.started_at = utc_now();
  try {
    if (cell.method == Method::Prompt) {
      run_prompt_cell(ctx, cell, row, dir);
    } else {
      run_embed_cell(ctx, cell, row, dir);
    }
  } catch (const std::exception& e) {
    row.status = "error";
    row.note = e.what();
  }
  row.finished_at = utc_now();
  write_file(result_path, row_to_json(row).dump(2) + "\n");
  return row;
}

std::string note_field(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::Prompt ? "prompt" : "embed"; }

std::string Cell::id() const {
  std::string out(to_string(method));
  out += "__";
  out += strategy ? std::string(fusion::to_string(*strategy)) : "none";
  out += "__";
  out += combo.empty() ? "baseline" : combo.label();
  return out;
}

RunConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config: ") + e.what());
  }
  RunConfig cfg;
  try {
    cfg.config_checksum = sha256_hex(j.dump());
    const auto& ds = j.at("dataset");
    cfg.dataset_path = resolve(base_dir, ds.at("path").get<std::string>());
    cfg.dataset_format = corpus::parse_format(ds.value("format", "generic_jsonl"));
    cfg.dataset_name = ds.value("name", cfg.dataset_path.stem().string());

    if (j.contains("split")) {
      const auto& sp = j["split"];
      cfg.seed = sp.value("seed", std::uint64_t{0});
      cfg.manifest_path = resolve(base_dir, sp.value("manifest", ""));
      cfg.generate_split = sp.value("generate", cfg.manifest_path.empty());
    }

    const auto& kbj = j.at("kb");
    cfg.kb_path = resolve(base_dir, kbj.at("path").get<std::string>());
    cfg.language = kbj.value("language", "en");
    cfg.model = j.value("model", "");

    for (const auto& m : j.value("methods", std::vector<std::string>{"prompt", "embed"})) {
      cfg.methods.push_back(parse_method(m));
    }
    for (const auto& s : j.value("strategies", std::vector<std::string>{"I", "II", "III"})) {
      cfg.strategies.push_back(fusion::parse_strategy(s));
    }
    if (!j.contains("combos") || (j["combos"].is_string() && j["combos"] == "all")) {
      cfg.combos = all_combos_with_baseline();
    } else {
      for (const auto& c : j.at("combos").get<std::vector<std::string>>()) {
        cfg.combos.push_back(kb::InfoCombo::parse(c));
      }
    }

    if (j.contains("chat")) {
      const auto& c = j["chat"];
      auto& s = cfg.chat;
      s.backend = c.value("backend", s.backend);
      s.base_url = c.value("base_url", "");
      s.model_id = c.value("model_id", "");
      s.api_key_env = c.value("api_key_env", s.api_key_env);
      s.replay_file = resolve(base_dir, c.value("replay_file", ""));
      s.record_file = resolve(base_dir, c.value("record_file", ""));
      s.temperature = c.value("temperature", s.temperature);
      s.max_tokens = c.value("max_tokens", s.max_tokens);
      s.timeout_ms = c.value("timeout_ms", s.timeout_ms);
      s.max_in_flight = c.value("max_in_flight", s.max_in_flight);
    }
    if (j.contains("embedding")) {
      const auto& e = j["embedding"];
      auto& s = cfg.embedding;
      s.backend = e.value("backend", s.backend);
      s.dump_file = resolve(base_dir, e.value("dump_file", ""));
      s.base_url = e.value("base_url", "");
      s.model = e.value("model", "");
      s.provider_id = e.value("provider_id", s.model);
      s.dim = e.value("dim", std::size_t{0});
      s.api_key_env = e.value("api_key_env", s.api_key_env);
      s.timeout_ms = e.value("timeout_ms", s.timeout_ms);
      s.max_in_flight = e.value("max_in_flight", s.max_in_flight);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      auto& s = cfg.train;
      s.max_epochs = t.value("max_epochs", s.max_epochs);
      s.batch_size = t.value("batch_size", s.batch_size);
      s.patience = t.value("patience", s.patience);
      s.shuffle_seed = t.value("shuffle_seed", s.shuffle_seed);
      s.adam.lr = t.value("lr", s.adam.lr);
      s.l2 = t.value("l2", s.l2);
    }
    const auto abstain = j.value("abstain_as", "no_hate");
    if (abstain == "no_hate") {
      cfg.abstain_label = Label::NoHate;
    } else if (abstain == "im_hate") {
      cfg.abstain_label = Label::ImHate;
    } else {
      throw Error(ErrorKind::InvalidConfig, "abstain_as must be no_hate or im_hate");
    }
    cfg.output_dir = resolve(base_dir, j.value("output_dir", "runs/out"));
    cfg.workers = j.value("workers", cfg.workers);
    cfg.resume = j.value("resume", false);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidConfig) throw;
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), fs::absolute(path).parent_path());
}

std::vector<Cell> expand_grid(const RunConfig& cfg) {
  std::vector<Cell> cells;
  auto has_method = [&](Method m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };
  const auto ordered = all_combos_with_baseline();
  if (has_method(Method::Prompt)) {
    for (auto c : ordered) {
      if (contains_combo(cfg.combos, c)) cells.push_back({Method::Prompt, std::nullopt, c});
    }
  }
  if (has_method(Method::Embed)) {
    if (contains_combo(cfg.combos, kb::InfoCombo{})) cells.push_back({Method::Embed, std::nullopt, kb::InfoCombo{}});
    for (auto s : {fusion::Strategy::I, fusion::Strategy::II, fusion::Strategy::III}) {
      if (std::find(cfg.strategies.begin(), cfg.strategies.end(), s) == cfg.strategies.end()) continue;
      for (auto c : kb::enumerate_combos()) {
        if (contains_combo(cfg.combos, c)) cells.push_back({Method::Embed, s, c});
      }
    }
  }
  return cells;
}

Plan validate_config(const RunConfig& cfg) {
  if (cfg.methods.empty()) {
    throw Error(ErrorKind::EmptyGrid, "no method selected");
  }
  require_file(cfg.dataset_path, "dataset");
  require_file(cfg.kb_path, "KB file");
  if (!cfg.generate_split) require_file(cfg.manifest_path, "split manifest");
  if (cfg.workers <= 0) {
    throw Error(ErrorKind::InvalidConfig, "workers must be positive");
  }
  auto cells = expand_grid(cfg);
  if (cells.empty()) {
    throw Error(ErrorKind::EmptyGrid, "the selected methods, strategies and combos produce no cells");
  }
  const bool prompt = std::any_of(cells.begin(), cells.end(), [](const Cell& c) { return c.method == Method::Prompt; });
  const bool embed = std::any_of(cells.begin(), cells.end(), [](const Cell& c) { return c.method == Method::Embed; });
  if (prompt) {
    if (cfg.chat.backend == "replay") {
      require_file(cfg.chat.replay_file, "chat replay file");
    } else if (cfg.chat.backend == "http") {
      if (cfg.chat.base_url.empty()) throw Error(ErrorKind::InvalidConfig, "chat.base_url is required for http");
    } else {
      throw Error(ErrorKind::InvalidConfig, "chat.backend must be http or replay");
    }
    if (cfg.chat.model_id.empty()) throw Error(ErrorKind::InvalidConfig, "chat.model_id is required");
  }
  if (embed) {
    if (cfg.embedding.backend == "dumpfile") {
      require_file(cfg.embedding.dump_file, "embedding dump");
    } else if (cfg.embedding.backend == "http") {
      if (cfg.embedding.base_url.empty() || cfg.embedding.dim == 0 || cfg.embedding.provider_id.empty()) {
        throw Error(ErrorKind::InvalidConfig, "embedding http backend needs base_url, provider_id and dim");
      }
    } else {
      throw Error(ErrorKind::InvalidConfig, "embedding.backend must be http or dumpfile");
    }
  }
  return {cfg, std::move(cells)};
}

bool RunResult::any_failed() const {
  return std::any_of(rows.begin(), rows.end(), [](const RunRow& r) { return r.failed(); });
}

int exit_code(const RunResult& result) { return result.any_failed() ? 2 : 0; }

RunResult execute(const Plan& plan, Backends backends) {
  const RunConfig& cfg = plan.config;
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);

  const auto dataset = corpus::load_dataset(cfg.dataset_path, cfg.dataset_format);
  const auto set = kb::load_codetypes(cfg.kb_path, {cfg.language, false});
  corpus::SplitManifest manifest;
  if (cfg.generate_split) {
    manifest = corpus::split(dataset, cfg.seed);
  } else {
    manifest = corpus::read_manifest(cfg.manifest_path);
    if (manifest.source_checksum != dataset.source_checksum) {
      throw Error(ErrorKind::InvalidConfig, "split manifest was made from a different dataset file");
    }
  }
  corpus::write_manifest(manifest, out / "manifest.json");

  const bool need_chat =
      std::any_of(plan.cells.begin(), plan.cells.end(), [](const Cell& c) { return c.method == Method::Prompt; });
  const bool need_embed =
      std::any_of(plan.cells.begin(), plan.cells.end(), [](const Cell& c) { return c.method == Method::Embed; });

  auto transport = backends.transport;
  std::shared_ptr<gateway::ChatProvider> chat = backends.chat;
  std::shared_ptr<gateway::ReplayStore> recorder;
  std::string chat_error;
  if (need_chat && !chat) {
    try {
      if (cfg.chat.backend == "replay") {
        chat = std::make_shared<gateway::ReplayChatProvider>(gateway::ReplayStore::load(cfg.chat.replay_file));
      } else {
        if (!cfg.chat.record_file.empty()) recorder = std::make_shared<gateway::ReplayStore>();
        if (!transport) transport = gateway::make_http_transport(std::chrono::milliseconds(cfg.chat.timeout_ms));
        gateway::HttpChatOptions options;
        options.base_url = cfg.chat.base_url;
        options.api_key_env = cfg.chat.api_key_env;
        options.max_in_flight = cfg.chat.max_in_flight;
        chat = std::make_shared<gateway::HttpChatProvider>(options, transport, recorder);
      }
    } catch (const std::exception& e) {
      chat_error = e.what();
    }
  }

  std::shared_ptr<gateway::EmbeddingProvider> embedding;
  std::string embedding_error;
  if (need_embed) {
    try {
      std::shared_ptr<gateway::EmbeddingProvider> backend = backends.embedding;
      if (!backend) {
        if (cfg.embedding.backend == "dumpfile") {
          backend = gateway::DumpEmbeddingProvider::load(cfg.embedding.dump_file);
        } else {
          if (!transport) {
            transport = gateway::make_http_transport(std::chrono::milliseconds(cfg.embedding.timeout_ms));
          }
          gateway::HttpEmbeddingOptions options;
          options.base_url = cfg.embedding.base_url;
          options.model = cfg.embedding.model;
          options.provider_id = cfg.embedding.provider_id;
          options.dim = cfg.embedding.dim;
          options.api_key_env = cfg.embedding.api_key_env;
          options.max_in_flight = cfg.embedding.max_in_flight;
          backend = std::make_shared<gateway::HttpEmbeddingProvider>(options, transport);
        }
      }
      embedding = std::make_shared<gateway::CachedEmbeddingProvider>(backend, std::make_shared<gateway::EmbeddingCache>());
    } catch (const std::exception& e) {
      embedding_error = e.what();
    }
  }

  std::string model = cfg.model;
  if (model.empty()) model = embedding ? embedding->provider_id() : cfg.chat.model_id;

  Context ctx{cfg,
              out,
              dataset,
              set,
              manifest,
              sha256_hex(corpus::manifest_to_json(manifest)),
              chat,
              chat_error,
              embedding,
              embedding_error,
              cfg.dataset_name.empty() ? cfg.dataset_path.stem().string() : cfg.dataset_name,
              model};

  RunResult result;
  result.rows.resize(plan.cells.size());
  std::atomic<std::size_t> next{0};
  {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), plan.cells.size());
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < plan.cells.size(); i = next++) {
          result.rows[i] = run_cell(ctx, plan.cells[i]);
        }
      });
    }
  }

  if (recorder && !cfg.chat.record_file.empty()) recorder->save(cfg.chat.record_file);

  const std::string csv = results_to_csv(result.rows);
  write_file(out / "results.csv", csv);
  const auto rep = report(result);
  write_file(out / "report.md", rep.markdown);
  write_file(out / "report.csv", rep.csv);

  ordered_json run;
  run["config_checksum"] = cfg.config_checksum;
  run["seed"] = manifest.seed;
  run["dataset"] = {{"path", cfg.dataset_path.string()}, {"format", corpus::to_string(cfg.dataset_format)},
                    {"sha256", dataset.source_checksum}};
  run["kb"] = {{"path", cfg.kb_path.string()}, {"language", cfg.language}, {"sha256", file_sha256(cfg.kb_path)}};
  run["manifest_sha256"] = ctx.manifest_checksum;
  run["providers"] = {{"chat", need_chat ? cfg.chat.model_id : ""},
                      {"embedding", embedding ? embedding->provider_id() : ""}};
  ordered_json backend_files = ordered_json::object();
  if (need_chat && cfg.chat.backend == "replay" && fs::exists(cfg.chat.replay_file)) {
    backend_files["chat_replay"] = {{"path", cfg.chat.replay_file.string()}, {"sha256", file_sha256(cfg.chat.replay_file)}};
  }
  if (need_embed && cfg.embedding.backend == "dumpfile" && fs::exists(cfg.embedding.dump_file)) {
    backend_files["embedding_dump"] = {{"path", cfg.embedding.dump_file.string()},
                                       {"sha256", file_sha256(cfg.embedding.dump_file)}};
  }
  run["backend_files"] = backend_files;
  run["train"] = {{"max_epochs", cfg.train.max_epochs}, {"batch_size", cfg.train.batch_size},
                  {"patience", cfg.train.patience}, {"shuffle_seed", cfg.train.shuffle_seed},
                  {"lr", cfg.train.adam.lr}, {"l2", cfg.train.l2}};
  run["cells"] = ordered_json::array();
  for (std::size_t i = 0; i < plan.cells.size(); ++i) {
    const auto dir = out / "cells" / plan.cells[i].id();
    ordered_json artifacts = ordered_json::object();
    if (fs::exists(dir)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) artifacts[f.filename().string()] = file_sha256(f);
    }
    const auto& row = result.rows[i];
    run["cells"].push_back({{"id", plan.cells[i].id()},
                            {"status", row.status},
                            {"started_at", row.started_at},
                            {"finished_at", row.finished_at},
                            {"artifacts", artifacts}});
  }
  run["results_csv_sha256"] = sha256_hex(csv);
  write_file(out / "run_manifest.json", run.dump(2) + "\n");
  return result;
}

// ------------------------------------------------------------------ results

namespace {

constexpr std::array<std::string_view, 16> kResultColumns{
    "dataset", "model",    "provider_id",  "method", "strategy", "combo", "f1_positive", "f1_macro",
    "precision", "recall", "abstain_rate", "scored", "unscored", "seed",  "status",      "note"};

}  // namespace

std::string results_to_csv(const std::vector<RunRow>& rows) {
  std::string out;
  for (std::size_t i = 0; i < kResultColumns.size(); ++i) {
    if (i > 0) out += ',';
    out += kResultColumns[i];
  }
  out += '\n';
  for (const auto& r : rows) {
    const std::array<std::string, 16> fields{r.dataset,
                                             r.model,
                                             r.provider_id,
                                             r.method,
                                             r.strategy,
                                             r.combo,
                                             format_double(r.f1_positive),
                                             format_double(r.f1_macro),
                                             format_double(r.precision),
                                             format_double(r.recall),
                                             format_double(r.abstain_rate),
                                             std::to_string(r.scored),
                                             std::to_string(r.unscored),
                                             std::to_string(r.seed),
                                             r.status,
                                             note_field(r.note)};
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_escape(fields[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<RunRow> results_from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) {
    throw Error(ErrorKind::Parse, "results CSV is empty");
  }
  const auto& header = rows.front();
  if (header.size() != kResultColumns.size() || !std::equal(header.begin(), header.end(), kResultColumns.begin())) {
    throw Error(ErrorKind::Parse, "results CSV header does not match the result schema");
  }
  auto number = [](const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error(ErrorKind::Parse, "bad number '" + s + "'");
    return v;
  };
  std::vector<RunRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != kResultColumns.size()) {
      throw Error(ErrorKind::Parse, "results CSV row " + std::to_string(i) + " has " + std::to_string(f.size()) +
                                        " fields");
    }
    RunRow r;
    try {
      r.dataset = f[0];
      r.model = f[1];
      r.provider_id = f[2];
      r.method = f[3];
      r.strategy = f[4];
      r.combo = f[5];
      r.f1_positive = number(f[6]);
      r.f1_macro = number(f[7]);
      r.precision = number(f[8]);
      r.recall = number(f[9]);
      r.abstain_rate = number(f[10]);
      r.scored = std::stoull(f[11]);
      r.unscored = std::stoull(f[12]);
      r.seed = std::stoull(f[13]);
      r.status = f[14];
      r.note = f[15];
    } catch (const std::logic_error& e) {
      throw Error(ErrorKind::Parse, "results CSV row " + std::to_string(i) + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace imhs::runner
