#pragma once

#include "imhs/corpus.hpp"
#include "imhs/gateway.hpp"
#include "imhs/kb.hpp"
#include "imhs/label.hpp"

#include <atomic>
#include <optional>
#include <string>
#include <string_view>

namespace imhs::prompt {

/// Fixed prompt texts. `[s]` and `[C]` are the only slots.
struct PromptTemplate {
  static constexpr std::string_view system =
      "Please answer the question strictly according to the given instructions.";
  static constexpr std::string_view user_plain =
      "Please determine if [s] is (A) implicit hate speech or (B) neutral speech.";
  static constexpr std::string_view user_codetype_prefix =
      "Codetypes are rhetorical strategies extracted from implicit hate speech that involve the moderation of "
      "language and the application of verbal techniques. Please answer based on the information of these 6 "
      "codetypes:\n[C]\n";
};

struct PromptOptions {
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 64;
  /// Score given to responses no parse rule understood.
  Label abstain_label = Label::NoHate;
};

/// No combo (or an empty one) gives the plain question.
gateway::ChatRequest build_prompt(std::string_view sentence, std::optional<kb::InfoCombo> combo,
                                  const kb::CodetypeSet& set, const PromptOptions& options);

enum class Verdict { ImHate, NoHate, Abstain };

std::string_view to_string(Verdict v);

struct ParsedVerdict {
  Verdict label = Verdict::Abstain;
  std::string evidence;  // the cue that fired, empty for Abstain
  std::string raw;
};

/// First rule that fires wins:
///   1. "(A)" / "(B)", any case
///   2. "implicit hate" / "neutral", any case
///   3. a leading bare "A" / "B" token
/// Both polarities firing at one level is an Abstain.
ParsedVerdict parse_label(std::string_view response);

struct PromptOutcome {
  std::string instance_id;
  Label label;  // Abstain resolved to options.abstain_label
  bool abstain = false;
  ParsedVerdict verdict;
  std::string model_id;
  kb::InfoCombo combo;
};

/// build_prompt -> chat -> parse_label. Abstains score as abstain_label and bump
/// the counter. Gateway errors propagate; the caller marks the instance
/// unscored.
PromptOutcome classify_prompt(const corpus::Instance& instance, std::optional<kb::InfoCombo> combo,
                              const kb::CodetypeSet& set, gateway::ChatProvider& chat, const PromptOptions& options,
                              std::atomic<std::size_t>* abstain_counter = nullptr);

/// One JSONL verdict-log line.
std::string verdict_log_line(const PromptOutcome& outcome);

}  // namespace imhs::prompt
