#include "imhs/prompt.hpp"

#include "imhs/text.hpp"

#include <json.hpp>

#include <cctype>

namespace imhs::prompt {

namespace {

std::string replace_slot(std::string_view tmpl, std::string_view slot, std::string_view value) {
  std::string out(tmpl);
  const auto pos = out.find(slot);
  if (pos != std::string::npos) out.replace(pos, slot.size(), value);
  return out;
}

bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

/// Leading token with trailing punctuation such as "A." or "B:" stripped.
std::string leading_token(std::string_view response) {
  const std::string t = trim(response);
  size_t end = 0;
  while (end < t.size() && !std::isspace(static_cast<unsigned char>(t[end]))) ++end;
  std::string token = t.substr(0, end);
  while (!token.empty() && std::string_view(".,:;)!").find(token.back()) != std::string_view::npos) token.pop_back();
  return token;
}

}  // namespace

gateway::ChatRequest build_prompt(std::string_view sentence, std::optional<kb::InfoCombo> combo,
                                  const kb::CodetypeSet& set, const PromptOptions& options) {
  std::string user = replace_slot(PromptTemplate::user_plain, "[s]", sentence);
  if (combo && !combo->empty()) {
    user = replace_slot(PromptTemplate::user_codetype_prefix, "[C]", kb::render_info(set, *combo)) + user;
  }
  return {std::string(PromptTemplate::system), std::move(user), options.model_id, options.temperature,
          options.max_tokens};
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::ImHate: return "im_hate";
    case Verdict::NoHate: return "no_hate";
    case Verdict::Abstain: return "abstain";
  }
  return "abstain";
}

ParsedVerdict parse_label(std::string_view response) {
  ParsedVerdict out{Verdict::Abstain, "", std::string(response)};
  const std::string lower = to_lower_ascii(response);

  auto decide = [&out](bool pos, bool neg, std::string_view pos_cue, std::string_view neg_cue) {
    if (pos == neg) return pos;  // both fired: stop with Abstain; neither: fall through
    out.label = pos ? Verdict::ImHate : Verdict::NoHate;
    out.evidence = pos ? pos_cue : neg_cue;
    return true;
  };

  if (decide(contains(lower, "(a)"), contains(lower, "(b)"), "(A)", "(B)")) return out;
  if (decide(contains(lower, "implicit hate"), contains(lower, "neutral"), "implicit hate", "neutral")) return out;
  const std::string token = leading_token(response);
  decide(token == "A", token == "B", "A", "B");
  return out;
}

PromptOutcome classify_prompt(const corpus::Instance& instance, std::optional<kb::InfoCombo> combo,
                              const kb::CodetypeSet& set, gateway::ChatProvider& chat, const PromptOptions& options,
                              std::atomic<std::size_t>* abstain_counter) {
  const auto request = build_prompt(instance.text, combo, set, options);
  auto verdict = parse_label(chat.chat(request));
  PromptOutcome outcome;
  outcome.instance_id = instance.id;
  outcome.abstain = verdict.label == Verdict::Abstain;
  outcome.label = verdict.label == Verdict::ImHate   ? Label::ImHate
                  : verdict.label == Verdict::NoHate ? Label::NoHate
                                                     : options.abstain_label;
  outcome.verdict = std::move(verdict);
  outcome.model_id = options.model_id;
  outcome.combo = combo.value_or(kb::InfoCombo{});
  if (outcome.abstain && abstain_counter != nullptr) ++*abstain_counter;
  return outcome;
}

std::string verdict_log_line(const PromptOutcome& outcome) {
  nlohmann::ordered_json j;
  j["instance_id"] = outcome.instance_id;
  j["combo"] = outcome.combo.label();
  j["raw_response"] = outcome.verdict.raw;
  j["parsed_label"] = to_string(outcome.verdict.label);
  j["abstain"] = outcome.abstain;
  j["model_id"] = outcome.model_id;
  return j.dump();
}

}  // namespace imhs::prompt
