// imhs: command-line front end for the codetype experiment harness.

#include "imhs/corpus.hpp"
#include "imhs/error.hpp"
#include "imhs/fusion.hpp"
#include "imhs/gateway.hpp"
#include "imhs/kb.hpp"
#include "imhs/logreg.hpp"
#include "imhs/metrics.hpp"
#include "imhs/prompt.hpp"
#include "imhs/runner.hpp"
#include "imhs/taxonomy.hpp"
#include "imhs/text.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace imhs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;

void print_kv(std::string_view k, const std::string& v) { std::cout << k << ": " << v << '\n'; }

taxonomy::Stage parse_stage(const std::string& s) {
  if (s == "zh") return taxonomy::Stage::Zh;
  if (s == "en") return taxonomy::Stage::En;
  throw Error(ErrorKind::InvalidConfig, "stage must be zh or en");
}

std::string candidates_jsonl(const std::vector<taxonomy::CandidateCodetype>& cands) {
  std::string out;
  for (const auto& c : cands) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["present_zh"] = c.present_zh;
    j["present_en"] = c.present_en;
    j["vector"] = std::vector<double>(c.vector.data(), c.vector.data() + c.vector.size());
    out += j.dump() + "\n";
  }
  return out;
}

std::map<std::string, int> read_counts_csv(const fs::path& path) {
  std::map<std::string, int> counts;
  auto rows = parse_csv(read_file(path));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() < 2) throw Error(ErrorKind::Parse, "counts row needs category,count");
    if (i == 0 && rows[i][0] == "category") continue;
    counts[trim(rows[i][0])] = std::stoi(rows[i][1]);
  }
  return counts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Codetype-augmented implicit hate speech detection harness"};
  app.require_subcommand(1);

  // ---------------------------------------------------------------- taxonomy
  auto* tax = app.add_subcommand("taxonomy", "Codetype taxonomy construction tools");
  tax->require_subcommand(1);

  std::string cand_path, stage = "", prune_out, prune_log;
  double threshold = taxonomy::kDefaultSimilarityThreshold;
  auto* prune = tax->add_subcommand("prune", "Presence filtering and similarity pruning of candidates");
  prune->add_option("--candidates", cand_path, "Candidate JSONL")->required()->check(CLI::ExistingFile);
  prune->add_option("--stage", stage, "Presence filter to apply first: zh, en, or both");
  prune->add_option("--threshold", threshold, "Remove candidates above this cosine similarity");
  prune->add_option("--out", prune_out, "Retained candidates JSONL");
  prune->add_option("--log", prune_log, "Removal log CSV");

  std::string sim_out;
  auto* sim = tax->add_subcommand("similarity", "Pairwise cosine similarity matrix as CSV");
  sim->add_option("--candidates", cand_path, "Candidate JSONL")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "Output CSV (stdout when omitted)");

  std::string ann_path, ann_out_dir;
  std::size_t top_k = 6;
  auto* kappa = tax->add_subcommand("kappa", "Fleiss' kappa over the three primary annotators");
  kappa->add_option("--annotations", ann_path, "CSV item_id,annotator_id,category")->required()->check(CLI::ExistingFile);

  std::string consensus_out;
  auto* consensus = tax->add_subcommand("consensus", "Final label per item (2-of-3 quorum, then fourth vote)");
  consensus->add_option("--annotations", ann_path, "Annotation CSV")->required()->check(CLI::ExistingFile);
  consensus->add_option("--out", consensus_out, "Output CSV item_id,category,escalated (stdout when omitted)");

  auto* tax_report = tax->add_subcommand("report", "Kappa, final distribution and top-k selection");
  tax_report->add_option("--annotations", ann_path, "Annotation CSV")->required()->check(CLI::ExistingFile);
  tax_report->add_option("--out-dir", ann_out_dir, "Directory for distribution.csv and summary.json")->required();
  tax_report->add_option("-k,--top-k", top_k, "Number of codetypes to select");

  std::string counts_path;
  auto* select = tax->add_subcommand("select", "Top-k categories from a category,count CSV");
  select->add_option("--counts", counts_path, "CSV category,count")->required()->check(CLI::ExistingFile);
  select->add_option("-k,--top-k", top_k, "Number of codetypes to select");

  // ------------------------------------------------------------------ split
  std::string dataset_path, format = "generic_jsonl", manifest_out;
  std::uint64_t seed = 0;
  auto* split_cmd = app.add_subcommand("split", "Stratified seeded 8:1:1 split manifest");
  split_cmd->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--format", format, "toxicn | latent | ishate | generic_jsonl");
  split_cmd->add_option("--seed", seed);
  split_cmd->add_option("--out", manifest_out, "Manifest JSON")->required();

  // -------------------------------------------------------------- featurize
  std::string manifest_path, which_split = "train", kb_path, language = "en", strategy, combo_label, dump_path,
                             matrix_out;
  auto* feat = app.add_subcommand("featurize", "Feature matrix for one split from an embedding dump");
  feat->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
  feat->add_option("--format", format);
  feat->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  feat->add_option("--split", which_split, "train | val | test");
  feat->add_option("--kb", kb_path)->required()->check(CLI::ExistingFile);
  feat->add_option("--language", language);
  feat->add_option("--strategy", strategy, "I | II | III; omit for the raw-text baseline");
  feat->add_option("--combo", combo_label, "e.g. Name+Samp; omit for the baseline");
  feat->add_option("--dump", dump_path, "Embedding dump JSONL")->required()->check(CLI::ExistingFile);
  feat->add_option("--out", matrix_out)->required();

  // ------------------------------------------------------------------ train
  std::string train_path, val_path, test_path, model_out, manifest_checksum;
  logreg::TrainConfig train_cfg;
  auto* train_cmd = app.add_subcommand("train", "Train the logistic-regression head on feature matrices");
  train_cmd->add_option("--train", train_path)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--val", val_path)->check(CLI::ExistingFile);
  train_cmd->add_option("--test", test_path, "Evaluate on this matrix after training")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", model_out, "Model artifact JSON")->required();
  train_cmd->add_option("--epochs", train_cfg.max_epochs);
  train_cmd->add_option("--batch-size", train_cfg.batch_size);
  train_cmd->add_option("--patience", train_cfg.patience);
  train_cmd->add_option("--lr", train_cfg.adam.lr);
  train_cmd->add_option("--l2", train_cfg.l2);
  train_cmd->add_option("--shuffle-seed", train_cfg.shuffle_seed);
  train_cmd->add_option("--manifest-checksum", manifest_checksum);

  // ------------------------------------------------------------- prompt-run
  std::string replay_path, record_path, base_url, model_id, verdict_out, api_key_env = "OPENAI_API_KEY";
  auto* prompt_cmd = app.add_subcommand("prompt-run", "Prompt-classify the test split for one combo");
  prompt_cmd->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
  prompt_cmd->add_option("--format", format);
  prompt_cmd->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  std::string prompt_split = "test";
  prompt_cmd->add_option("--split", prompt_split, "train | val | test");
  prompt_cmd->add_option("--kb", kb_path)->required()->check(CLI::ExistingFile);
  prompt_cmd->add_option("--language", language);
  prompt_cmd->add_option("--combo", combo_label, "Omit for the no-codetype prompt");
  prompt_cmd->add_option("--replay", replay_path, "Replay JSONL (offline)");
  prompt_cmd->add_option("--base-url", base_url, "OpenAI-compatible endpoint");
  prompt_cmd->add_option("--api-key-env", api_key_env);
  prompt_cmd->add_option("--record", record_path, "Record responses to this replay JSONL");
  prompt_cmd->add_option("--model-id", model_id)->required();
  prompt_cmd->add_option("--out", verdict_out, "Verdict log JSONL")->required();

  // -------------------------------------------------------------------- run
  std::string config_path, output_dir;
  bool resume = false;
  int workers = 0;
  std::optional<std::uint64_t> seed_override;
  auto* run_cmd = app.add_subcommand("run", "Execute a full experiment grid");
  run_cmd->add_option("--config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--output-dir", output_dir);
  run_cmd->add_option("--workers", workers);
  run_cmd->add_option("--seed", seed_override, "Override the split seed");
  run_cmd->add_flag("--resume", resume, "Skip cells whose results already exist");

  // ----------------------------------------------------------------- report
  std::string results_path, report_dir;
  auto* report_cmd = app.add_subcommand("report", "Render report.md/report.csv from results.csv");
  report_cmd->add_option("--results", results_path)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out-dir", report_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; any usage error is an invalid invocation.
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*prune) {
      auto cands = taxonomy::load_candidates(cand_path);
      if (stage == "both") {
        cands = taxonomy::filter_by_presence(taxonomy::filter_by_presence(cands, taxonomy::Stage::Zh),
                                             taxonomy::Stage::En);
      } else if (!stage.empty()) {
        cands = taxonomy::filter_by_presence(cands, parse_stage(stage));
      }
      const auto result = taxonomy::prune_by_similarity(cands, threshold);
      std::string log = "removed,kept,similarity\n";
      for (const auto& r : result.log) {
        log += csv_escape(r.removed) + "," + csv_escape(r.kept) + "," + format_double(r.similarity) + "\n";
      }
      if (!prune_out.empty()) write_file(prune_out, candidates_jsonl(result.retained));
      if (!prune_log.empty()) write_file(prune_log, log);
      std::cout << "retained " << result.retained.size() << " of " << cands.size() << '\n';
      for (const auto& c : result.retained) std::cout << "  " << c.name << '\n';
      if (prune_log.empty()) std::cout << log;
    } else if (*sim) {
      const auto csv = taxonomy::similarity_matrix_csv(taxonomy::load_candidates(cand_path));
      if (sim_out.empty()) {
        std::cout << csv;
      } else {
        write_file(sim_out, csv);
      }
    } else if (*kappa) {
      const auto votes = taxonomy::load_annotations(ann_path);
      const auto k = taxonomy::fleiss_kappa(taxonomy::build_annotation_matrix(votes));
      print_kv("items", std::to_string(votes.size()));
      print_kv("kappa", format_double(k.kappa));
      print_kv("p_bar", format_double(k.p_bar));
      print_kv("p_e", format_double(k.p_e));
    } else if (*consensus) {
      const auto outcomes = taxonomy::consensus_labels(taxonomy::load_annotations(ann_path));
      std::string csv = "item_id,category,escalated\n";
      std::size_t unresolved = 0;
      for (const auto& o : outcomes) {
        if (taxonomy::is_unresolved(o)) ++unresolved;
        csv += csv_escape(o.item_id) + "," + csv_escape(o.category.value_or("Unresolved")) + "," +
               (o.escalated ? "1" : "0") + "\n";
      }
      if (consensus_out.empty()) {
        std::cout << csv;
      } else {
        write_file(consensus_out, csv);
      }
      if (unresolved > 0) std::cerr << unresolved << " item(s) need a fourth vote\n";
    } else if (*tax_report) {
      const auto votes = taxonomy::load_annotations(ann_path);
      const auto k = taxonomy::fleiss_kappa(taxonomy::build_annotation_matrix(votes));
      const auto outcomes = taxonomy::consensus_labels(votes);
      const auto counts = taxonomy::final_counts(outcomes);
      std::size_t quorum = 0;
      std::size_t unresolved = 0;
      for (const auto& o : outcomes) {
        if (!o.escalated) ++quorum;
        if (taxonomy::is_unresolved(o)) ++unresolved;
      }
      write_file(fs::path(ann_out_dir) / "distribution.csv", taxonomy::distribution_csv(counts));
      nlohmann::ordered_json summary;
      summary["items"] = votes.size();
      summary["kappa"] = k.kappa;
      summary["p_bar"] = k.p_bar;
      summary["p_e"] = k.p_e;
      summary["consensus_ratio"] = votes.empty() ? 0.0 : double(quorum) / double(votes.size());
      summary["unresolved"] = unresolved;
      summary["selected"] = taxonomy::select_top_k(counts, top_k);
      write_file(fs::path(ann_out_dir) / "summary.json", summary.dump(2) + "\n");
      std::cout << summary.dump(2) << '\n';
    } else if (*select) {
      for (const auto& c : taxonomy::select_top_k(read_counts_csv(counts_path), top_k)) std::cout << c << '\n';
    } else if (*split_cmd) {
      const auto ds = corpus::load_dataset(dataset_path, corpus::parse_format(format));
      const auto m = corpus::split(ds, seed);
      corpus::write_manifest(m, manifest_out);
      const auto stats = [&](const std::vector<std::string>& ids) {
        const auto s = corpus::class_stats(ds, ids);
        return std::to_string(s.total()) + " (im_hate " + std::to_string(s.im_hate) + ", no_hate " +
               std::to_string(s.no_hate) + ")";
      };
      print_kv("dataset", std::to_string(ds.instances.size()) + " instances, " + std::to_string(ds.skipped_rows) +
                              " rows of other classes skipped");
      print_kv("train", stats(m.train));
      print_kv("val", stats(m.val));
      print_kv("test", stats(m.test));
    } else if (*feat) {
      const auto ds = corpus::load_dataset(dataset_path, corpus::parse_format(format));
      const auto m = corpus::read_manifest(manifest_path);
      const auto set = kb::load_codetypes(kb_path, {language, false});
      const auto& ids = which_split == "train" ? m.train : (which_split == "val" ? m.val : m.test);
      std::optional<fusion::FeatureSpec> spec;
      if (!strategy.empty() || !combo_label.empty()) {
        if (strategy.empty() || combo_label.empty()) {
          throw Error(ErrorKind::InvalidConfig, "--strategy and --combo go together");
        }
        spec = fusion::FeatureSpec{kb::InfoCombo::parse(combo_label), fusion::parse_strategy(strategy)};
      }
      auto provider = gateway::DumpEmbeddingProvider::load(dump_path);
      const auto result = fusion::featurize_split(ids, ds, set, spec, *provider);
      fusion::write_matrix(result.matrix, matrix_out);
      print_kv("rows", std::to_string(result.matrix.header.rows));
      print_kv("dim", std::to_string(result.matrix.header.dim));
      if (!result.missing.empty()) std::cerr << result.missing.size() << " instance(s) missing from the dump\n";
    } else if (*train_cmd) {
      const auto tr = fusion::read_matrix(train_path);
      fusion::FeatureMatrix va;
      va.features.resize(0, tr.features.cols());
      if (!val_path.empty()) va = fusion::read_matrix(val_path);
      const auto result = logreg::train(tr.features, tr.golds, va.features, va.golds, train_cfg);
      logreg::write_artifact({result.model, tr.header.provider_id, tr.header.strategy, tr.header.combo,
                              manifest_checksum},
                             model_out);
      print_kv("epochs", std::to_string(result.log.size()));
      print_kv("best_epoch", std::to_string(result.best_epoch));
      if (!test_path.empty()) {
        const auto te = fusion::read_matrix(test_path);
        const auto rep =
            metrics::f1_from_counts(metrics::confusion(logreg::predict_all(result.model, te.features), te.golds));
        print_kv("test_f1", format_double(rep.f1_positive));
        print_kv("test_f1_macro", format_double(rep.f1_macro));
      }
    } else if (*prompt_cmd) {
      const auto ds = corpus::load_dataset(dataset_path, corpus::parse_format(format));
      const auto m = corpus::read_manifest(manifest_path);
      const auto set = kb::load_codetypes(kb_path, {language, false});
      std::shared_ptr<gateway::ChatProvider> chat;
      std::shared_ptr<gateway::ReplayStore> recorder;
      if (!replay_path.empty()) {
        chat = std::make_shared<gateway::ReplayChatProvider>(gateway::ReplayStore::load(replay_path));
      } else if (!base_url.empty()) {
        if (!record_path.empty()) recorder = std::make_shared<gateway::ReplayStore>();
        gateway::HttpChatOptions options;
        options.base_url = base_url;
        options.api_key_env = api_key_env;
        chat = std::make_shared<gateway::HttpChatProvider>(options, gateway::make_http_transport(), recorder);
      } else {
        throw Error(ErrorKind::InvalidConfig, "give --replay or --base-url");
      }
      std::optional<kb::InfoCombo> combo;
      if (!combo_label.empty()) combo = kb::InfoCombo::parse(combo_label);
      const auto& ids = prompt_split == "train" ? m.train : (prompt_split == "val" ? m.val : m.test);
      prompt::PromptOptions options;
      options.model_id = model_id;
      std::atomic<std::size_t> abstains{0};
      std::vector<Label> preds, golds;
      std::string log;
      std::size_t unscored = 0;
      for (const auto& id : ids) {
        const auto& inst = ds.find(id);
        try {
          const auto outcome = prompt::classify_prompt(inst, combo, set, *chat, options, &abstains);
          preds.push_back(outcome.label);
          golds.push_back(inst.label);
          log += prompt::verdict_log_line(outcome) + "\n";
        } catch (const Error& e) {
          ++unscored;
          std::cerr << id << ": " << e.what() << '\n';
        }
      }
      write_file(verdict_out, log);
      if (recorder) recorder->save(record_path);
      const auto rep = metrics::f1_from_counts(metrics::confusion(preds, golds));
      print_kv("scored", std::to_string(preds.size()));
      print_kv("unscored", std::to_string(unscored));
      print_kv("abstains", std::to_string(abstains.load()));
      print_kv("f1", format_double(rep.f1_positive));
      print_kv("f1_macro", format_double(rep.f1_macro));
      return unscored > 0 ? 2 : kExitOk;
    } else if (*run_cmd) {
      runner::Plan plan;
      try {
        auto cfg = runner::load_config(config_path);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (workers > 0) cfg.workers = workers;
        if (seed_override) cfg.seed = *seed_override;
        cfg.resume = cfg.resume || resume;
        plan = runner::validate_config(cfg);
      } catch (const Error& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return kExitFailure;
      }
      std::cout << "running " << plan.cells.size() << " cells into " << plan.config.output_dir.string() << '\n';
      const auto result = runner::execute(plan);
      for (const auto& r : result.rows) {
        if (r.failed()) std::cerr << "cell " << r.method << "/" << r.strategy << "/" << r.combo << ": " << r.note << '\n';
      }
      std::cout << runner::report(result).markdown;
      return runner::exit_code(result);
    } else if (*report_cmd) {
      runner::RunResult result{runner::results_from_csv(read_file(results_path))};
      const auto rep = runner::report(result);
      if (report_dir.empty()) {
        std::cout << rep.markdown;
      } else {
        write_file(fs::path(report_dir) / "report.md", rep.markdown);
        write_file(fs::path(report_dir) / "report.csv", rep.csv);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
