#pragma once

#include "imhs/corpus.hpp"
#include "imhs/fusion.hpp"
#include "imhs/gateway.hpp"
#include "imhs/kb.hpp"
#include "imhs/logreg.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace imhs::runner {

enum class Method { Prompt, Embed };

std::string_view to_string(Method m);

struct ChatBackendSpec {
  std::string backend = "replay";  // http | replay
  std::string base_url;
  std::string model_id;
  std::string api_key_env = "OPENAI_API_KEY";
  std::filesystem::path replay_file;
  /// http only: where to persist recorded responses after the run.
  std::filesystem::path record_file;
  double temperature = 0.0;
  int max_tokens = 64;
  int timeout_ms = 60000;
  int max_in_flight = 4;
};

struct EmbeddingBackendSpec {
  std::string backend = "dumpfile";  // http | dumpfile
  std::filesystem::path dump_file;
  std::string base_url;
  std::string model;
  std::string provider_id;
  std::size_t dim = 0;
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_ms = 60000;
  int max_in_flight = 4;
};

struct RunConfig {
  std::filesystem::path dataset_path;
  corpus::Format dataset_format = corpus::Format::GenericJsonl;
  std::string dataset_name;
  std::filesystem::path manifest_path;  // used when set and not generating
  std::uint64_t seed = 0;
  bool generate_split = true;
  std::filesystem::path kb_path;
  std::string language = "en";
  /// Column label of the result table; defaults to the embedding provider id.
  std::string model;
  std::vector<Method> methods;
  std::vector<fusion::Strategy> strategies;
  /// May include the empty combo (baseline).
  std::vector<kb::InfoCombo> combos;
  ChatBackendSpec chat;
  EmbeddingBackendSpec embedding;
  logreg::TrainConfig train;
  Label abstain_label = Label::NoHate;
  std::filesystem::path output_dir = "runs/out";
  int workers = 4;
  bool resume = false;
  /// Checksum of the config document as loaded.
  std::string config_checksum;
};

/// Parses the JSON config; relative paths resolve against `base_dir`.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

struct Cell {
  Method method;
  std::optional<fusion::Strategy> strategy;  // embed cells with codetypes only
  kb::InfoCombo combo;                       // empty = baseline

  [[nodiscard]] std::string id() const;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct Plan {
  RunConfig config;
  std::vector<Cell> cells;
};

/// Cross product in result-table order: prompt cells (baseline first, then
/// combos), the embedding baseline, then strategy-major embedding cells.
std::vector<Cell> expand_grid(const RunConfig& cfg);

/// Checks referenced files and expands the grid.
Plan validate_config(const RunConfig& cfg);

struct RunRow {
  std::string dataset;
  std::string model;
  std::string provider_id;
  std::string method;
  std::string strategy = "-";
  std::string combo = "-";
  double f1_positive = 0.0;
  double f1_macro = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double abstain_rate = 0.0;
  std::size_t scored = 0;
  std::size_t unscored = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | error
  std::string note;
  // Kept out of results.csv so reruns stay byte-identical.
  std::string started_at;
  std::string finished_at;

  [[nodiscard]] bool failed() const { return status != "ok"; }
};

struct RunResult {
  std::vector<RunRow> rows;
  [[nodiscard]] bool any_failed() const;
};

/// Optional overrides used by tests and the CLI.
struct Backends {
  std::shared_ptr<gateway::ChatProvider> chat;
  std::shared_ptr<gateway::EmbeddingProvider> embedding;
  /// Used to build http providers when no provider is injected.
  std::shared_ptr<gateway::HttpTransport> transport;
};

RunResult execute(const Plan& plan, Backends backends = {});

// --- results and reports ---

std::string results_to_csv(const std::vector<RunRow>& rows);
std::vector<RunRow> results_from_csv(std::string_view text);

struct Report {
  std::string markdown;
  std::string csv;
};

/// Rows are (method, strategy, combo), columns are (dataset, model); the
/// best f1_positive per column is flagged, ties going to the earlier row.
Report report(const RunResult& result);

/// 0 all cells ok, 2 some failed.
int exit_code(const RunResult& result);

}  // namespace imhs::runner
