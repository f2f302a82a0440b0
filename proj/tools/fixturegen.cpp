// Builds offline backend fixtures for a dataset: an embedding dump covering
// every text the full grid requests, and recorded chat responses for every
// prompt cell on the test split. Values derive from text hashes, so output
// is byte-identical across runs and platforms.

#include "imhs/corpus.hpp"
#include "imhs/fusion.hpp"
#include "imhs/gateway.hpp"
#include "imhs/kb.hpp"
#include "imhs/prompt.hpp"
#include "imhs/text.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <numbers>
#include <random>
#include <set>

using namespace imhs;

namespace {

std::mt19937_64 rng_for(const std::string& hex_hash) { return std::mt19937_64(std::stoull(hex_hash.substr(0, 16), nullptr, 16)); }

double unit_uniform(std::mt19937_64& rng) { return (double(rng() >> 11) + 0.5) * 0x1.0p-53; }

/// Box-Muller on our own uniforms; std::normal_distribution is not portable.
double standard_normal(std::mt19937_64& rng) {
  const double u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate deterministic embedding-dump and chat-replay fixtures"};
  std::string dataset_path, kb_path, language = "en", dump_out, replay_out, provider_id = "fixture-mha-d8",
                                     model_id = "fixture-chat";
  std::uint64_t seed = 7;
  std::size_t dim = 8;
  double signal = 0.35;
  app.add_option("--dataset", dataset_path, "generic_jsonl dataset")->required()->check(CLI::ExistingFile);
  app.add_option("--kb", kb_path)->required()->check(CLI::ExistingFile);
  app.add_option("--language", language);
  app.add_option("--seed", seed, "Split seed the grid will use");
  app.add_option("--dim", dim);
  app.add_option("--signal", signal, "Per-dimension class offset added to the hash noise");
  app.add_option("--provider-id", provider_id);
  app.add_option("--model-id", model_id);
  app.add_option("--dump-out", dump_out)->required();
  app.add_option("--replay-out", replay_out)->required();
  CLI11_PARSE(app, argc, argv);

  try {
    const auto ds = corpus::load_dataset(dataset_path, corpus::Format::GenericJsonl);
    const auto set = kb::load_codetypes(kb_path, {language, false});
    const auto manifest = corpus::split(ds, seed);

    // Every encoder input of every instance under every strategy/combo.
    std::map<std::string, Label> texts;
    for (const auto& inst : ds.instances) {
      texts.emplace(inst.text, inst.label);
      for (auto combo : kb::enumerate_combos()) {
        for (auto s : {fusion::Strategy::I, fusion::Strategy::II}) {
          for (const auto& t : fusion::build_inputs(inst.text, set, combo, s)) texts.emplace(t, inst.label);
        }
      }
    }
    std::map<std::string, gateway::DumpEntry> by_hash;
    for (const auto& [text, label] : texts) {
      const auto hash = text_hash(text);
      auto rng = rng_for(hash);
      gateway::DumpEntry e{hash, {}};
      const double offset = label == Label::ImHate ? signal : -signal;
      for (std::size_t i = 0; i < dim; ++i) e.values.push_back(static_cast<float>(standard_normal(rng) + offset));
      by_hash.emplace(hash, std::move(e));
    }
    std::vector<gateway::DumpEntry> entries;
    for (auto& [_, e] : by_hash) entries.push_back(std::move(e));
    write_file(dump_out, gateway::dump_to_jsonl(provider_id, dim, entries));

    gateway::ReplayStore replay;
    std::vector<std::optional<kb::InfoCombo>> combos{std::nullopt};
    for (auto c : kb::enumerate_combos()) combos.emplace_back(c);
    prompt::PromptOptions options;
    options.model_id = model_id;
    for (const auto& id : manifest.test) {
      const auto& inst = ds.find(id);
      for (const auto& combo : combos) {
        const auto req = prompt::build_prompt(inst.text, combo, set, options);
        const auto hash = gateway::request_hash(req);
        auto rng = rng_for(hash);
        const double u = unit_uniform(rng);
        const bool hateful = inst.label == Label::ImHate;
        std::string response;
        if (u < 0.1) {
          response = "I cannot say.";
        } else if (u < 0.3) {
          response = hateful ? "(B) neutral speech." : "The answer is (A).";
        } else {
          response = hateful ? "(A) implicit hate speech." : "This is neutral speech.";
        }
        replay.put({hash, response, model_id});
      }
    }
    replay.save(replay_out);
    std::cout << entries.size() << " dump entries, " << replay.size() << " recorded responses\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
