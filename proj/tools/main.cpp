// temba: template-based dialogue embedding toolkit.
//
// Subcommands: augment, train, eval, analyze. All randomness flows from
// one --seed flag; subsystem seeds (init, shuffle, dropout) are derived
// from it by labeled hashing so runs are reproducible end to end.
//
// Exit codes: 0 success, 1 usage/config error, 2 data validation error,
// 3 runtime numerical error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "temba/analyze.hpp"
#include "temba/augment.hpp"
#include "temba/corpus.hpp"
#include "temba/encoder.hpp"
#include "temba/infer.hpp"
#include "temba/train.hpp"

namespace fs = std::filesystem;
using namespace temba;

namespace {

constexpr std::uint64_t kInitLabel = 101;
constexpr std::uint64_t kShuffleLabel = 102;
constexpr std::uint64_t kDropoutLabel = 103;

RenderMode parse_render_mode(const std::string& s) {
  if (s == "category") return RenderMode::category_tokens;
  if (s == "slot") return RenderMode::single_slot_token;
  throw CLI::ValidationError("--render-mode must be 'category' or 'slot'");
}

std::vector<double> parse_lambda_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  return out;
}

struct AugmentArgs {
  std::string corpus_path, split = "train", out_dir = ".";
  std::string gazetteer_path;
  std::size_t top_k = 5;
  std::string render_mode = "category";
  std::size_t max_perms = 0;  // 0 = unlimited
};

int cmd_augment(const AugmentArgs& args) {
  Corpus corpus = load_corpus(args.corpus_path, split_from_string(args.split));
  if (!args.gazetteer_path.empty()) {
    EntityBook gaz = load_entity_book(args.gazetteer_path);
    for (auto& u : corpus.utterances)
      if (u.slots.empty()) u.slots = detect_slots_gazetteer(u.tokens, gaz);
  }
  AugmentStrategy strategy;
  strategy.top_k = args.top_k;
  strategy.render_mode = parse_render_mode(args.render_mode);
  if (args.max_perms > 0) strategy.max_permutations_per_template = args.max_perms;

  AugmentResult result = augment_corpus(corpus, strategy);
  AugmentStats stats =
      augmentation_stats(corpus, result.templates, result.pairs, result.book);

  fs::create_directories(args.out_dir);
  save_augmented(result.pairs, args.out_dir + "/augmented.jsonl");
  save_entity_book(result.book, args.out_dir + "/entity_book.json");
  save_templates(result.templates, args.out_dir + "/templates.jsonl");

  nlohmann::json st;
  st["entity_categories"] = stats.entity_categories;
  st["entity_values"] = stats.entity_values;
  st["templates"] = stats.templates;
  st["original_utterances"] = stats.original_utterances;
  st["total_utterances"] = stats.total_utterances;
  st["synthetic_utterances"] = stats.synthetic_utterances;
  st["ut_ratio"] = stats.ut_ratio;
  st["ut_defined"] = stats.ut_defined;
  st["ut_multiplier"] = stats.ut_multiplier;
  std::ofstream stf(args.out_dir + "/stats.json");
  stf << st.dump(2) << '\n';

  std::printf("entities %zu | values %zu | templates %zu | orig %zu | utterances %zu | U/T %zux\n",
              stats.entity_categories, stats.entity_values, stats.templates,
              stats.original_utterances, stats.total_utterances,
              stats.ut_multiplier);
  return 0;
}

// This CLI11 build only reads config files registered on the top-level
// app, not on subcommands, so apply the train config file by hand.
// Command-line flags win over file values.
void apply_config_file(CLI::App* cmd) {
  auto* cfg = cmd->get_config_ptr();
  if (cfg == nullptr || cfg->count() == 0) return;
  for (const auto& file : cfg->as<std::vector<std::string>>()) {
    for (const auto& item : cmd->get_config_formatter()->from_file(file)) {
      CLI::Option* opt = cmd->get_option_no_throw("--" + item.name);
      if (opt == nullptr)
        throw CLI::ConfigError("unknown config key: " + item.name);
      if (opt->count() > 0) continue;
      for (const auto& input : item.inputs) opt->add_result(input);
      opt->run_callback();
    }
  }
}

struct TrainArgs {
  std::string corpus_path, templates_path, out_dir = ".";
  std::string render_mode = "category";
  std::size_t dim = 64;
  double dropout = 0.1;
  TrainConfig config;
  std::uint64_t seed = 0;
  bool align = false;
};

int cmd_train(TrainArgs& args) {
  std::vector<Template> templates = load_templates(args.templates_path);
  std::vector<AugmentedPair> pairs = load_augmented(
      args.corpus_path, templates, parse_render_mode(args.render_mode));

  args.config.alignment_enabled = args.align;
  args.config.shuffle_seed = seed_hash(args.seed, kShuffleLabel, 0, 0, 0);
  args.config.dropout_seed_base = seed_hash(args.seed, kDropoutLabel, 0, 0, 0);
  try {
    args.config.validate();
    if (args.dropout < 0.0 || args.dropout >= 1.0)
      throw TrainError("dropout rate must be in [0, 1)");
  } catch (const TrainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }

  std::vector<std::vector<std::string>> texts;
  std::vector<std::string> categories;
  for (const auto& p : pairs) {
    texts.push_back(p.utterance.tokens);
    texts.push_back(split_on_spaces(p.rendered_template));
  }
  for (const auto& t : templates)
    for (const auto& c : t.categories()) categories.push_back(c);
  Vocab vocab = Vocab::build(texts, categories);

  EncoderParams params = init_params(vocab, args.dim, args.dropout,
                                     seed_hash(args.seed, kInitLabel, 0, 0, 0));
  std::vector<TrainItem> items;
  items.reserve(pairs.size());
  for (const auto& p : pairs) items.push_back(to_train_item(p));

  TrainResult result = train(std::move(params), items, args.config);

  fs::create_directories(args.out_dir);
  save_checkpoint(result.params, args.out_dir + "/checkpoint.txt");
  save_trace(result.trace, args.out_dir + "/trace.jsonl");
  if (!result.trace.empty())
    std::printf("final step loss %.6f (%zu steps)\n",
                result.trace.back().l_train, result.trace.size());
  return 0;
}

struct EvalArgs {
  std::string checkpoint_path, pairs_path, templates_path, test_path;
  std::string validation_path, select_lambdas;
  std::string render_mode = "category";
  std::string out_path = "report.json";
  double lambda_comp = 0.0;
  std::size_t k = 1;
  bool include_templates = true;
  bool align = false;
};

int cmd_eval(EvalArgs& args) {
  EncoderParams params = load_checkpoint(args.checkpoint_path);
  std::vector<Template> templates = load_templates(args.templates_path);
  std::vector<AugmentedPair> pairs = load_augmented(
      args.pairs_path, templates, parse_render_mode(args.render_mode));
  Corpus test = load_corpus(args.test_path, Split::test);

  double lambda = args.lambda_comp;
  if (!args.select_lambdas.empty()) {
    if (args.validation_path.empty())
      throw CLI::ValidationError("--select-lambdas requires --validation");
    Corpus validation = load_corpus(args.validation_path, Split::validation);
    lambda = select_lambda(params, pairs, templates, validation,
                           parse_lambda_list(args.select_lambdas), args.k,
                           args.include_templates, args.align);
    std::printf("selected lambda_comp %.3g\n", lambda);
  }

  EvalReport report = evaluate(params, pairs, templates, test, lambda, args.k,
                               args.include_templates, args.align);
  save_report(report, args.out_path);
  std::printf("accuracy %.4f (lambda %.3g, k %zu)\n", report.accuracy, lambda,
              args.k);
  return 0;
}

struct AnalyzeArgs {
  std::string checkpoint_path, pairs_path, templates_path, eval_path;
  std::string lambdas = "0,0.25,0.5,0.75,1";
  std::string render_mode = "category";
  std::string out_dir = ".";
  std::size_t k = 1;
  bool include_templates = true;
  bool align = false;
};

int cmd_analyze(AnalyzeArgs& args) {
  EncoderParams params = load_checkpoint(args.checkpoint_path);
  std::vector<Template> templates = load_templates(args.templates_path);
  RenderMode mode = parse_render_mode(args.render_mode);
  std::vector<AugmentedPair> pairs =
      load_augmented(args.pairs_path, templates, mode);
  Corpus eval_corpus = load_corpus(args.eval_path, Split::test);

  std::vector<SpaceReport> reports = compression_sweep(
      params, pairs, templates, eval_corpus, parse_lambda_list(args.lambdas),
      args.k, args.include_templates, args.align, mode);

  fs::create_directories(args.out_dir);
  save_sweep(reports, args.out_dir + "/sweep.tsv");
  EmbeddingStore store = build_store(params, pairs, templates,
                                     args.include_templates, 0.0, args.align);
  export_embeddings(store, args.out_dir + "/embeddings.tsv");
  for (const auto& r : reports)
    std::printf("lambda %.3g | uniformity %.4f | alignment %.4f | accuracy %.4f\n",
                r.lambda_comp, r.uniformity, r.alignment, r.accuracy);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"template-based dialogue embedding toolkit"};
  app.require_subcommand(1);

  AugmentArgs aug;
  auto* cmd_aug = app.add_subcommand("augment",
      "build entity book, templates, and synthetic utterances");
  cmd_aug->add_option("--corpus", aug.corpus_path, "input corpus (jsonl)")->required();
  cmd_aug->add_option("--split", aug.split, "corpus split name");
  cmd_aug->add_option("--top-k", aug.top_k, "top-k entity values per category");
  cmd_aug->add_option("--render-mode", aug.render_mode, "category|slot");
  cmd_aug->add_option("--max-perms", aug.max_perms,
                      "cap on synthetic utterances per template (0 = unlimited)");
  cmd_aug->add_option("--gazetteer", aug.gazetteer_path,
                      "entity book for slot detection on un-annotated corpora");
  cmd_aug->add_option("--out", aug.out_dir, "output directory");

  TrainArgs tr;
  auto* cmd_tr = app.add_subcommand("train", "contrastive training");
  cmd_tr->add_option("--corpus", tr.corpus_path, "augmented corpus (jsonl)")->required();
  cmd_tr->add_option("--templates", tr.templates_path, "templates file")->required();
  cmd_tr->add_option("--render-mode", tr.render_mode, "category|slot");
  cmd_tr->add_option("--dim", tr.dim, "embedding dimension");
  cmd_tr->add_option("--dropout", tr.dropout, "dropout rate");
  cmd_tr->add_option("--tau-t", tr.config.tau_t, "template loss temperature");
  cmd_tr->add_option("--tau-u", tr.config.tau_u, "utterance loss temperature");
  cmd_tr->add_option("--tau-pair", tr.config.tau_pair, "pairwise loss temperature");
  cmd_tr->add_option("--lambda-t", tr.config.lambda_t, "template loss weight");
  cmd_tr->add_option("--lambda-u", tr.config.lambda_u, "utterance loss weight");
  cmd_tr->add_option("--lambda-pair", tr.config.lambda_pair, "pairwise loss weight");
  cmd_tr->add_option("--epochs", tr.config.epochs, "training epochs");
  cmd_tr->add_option("--batch-size", tr.config.batch_size, "batch size N");
  cmd_tr->add_option("--lr", tr.config.learning_rate, "SGD learning rate");
  cmd_tr->add_flag("--align", tr.align, "enable the template alignment MLP");
  cmd_tr->add_option("--seed", tr.seed, "global seed")->required();
  cmd_tr->add_option("--out", tr.out_dir, "output directory");
  cmd_tr->set_config("--config", "", "key=value config file; flags override");

  EvalArgs ev;
  auto* cmd_ev = app.add_subcommand("eval", "kNN intent evaluation");
  cmd_ev->add_option("--checkpoint", ev.checkpoint_path, "encoder checkpoint")->required();
  cmd_ev->add_option("--corpus", ev.pairs_path, "augmented training corpus")->required();
  cmd_ev->add_option("--templates", ev.templates_path, "templates file")->required();
  cmd_ev->add_option("--test", ev.test_path, "test corpus")->required();
  cmd_ev->add_option("--render-mode", ev.render_mode, "category|slot");
  cmd_ev->add_option("--lambda-comp", ev.lambda_comp, "compression coefficient");
  cmd_ev->add_option("--select-lambdas", ev.select_lambdas,
                     "comma-separated candidates; best chosen on --validation");
  cmd_ev->add_option("--validation", ev.validation_path, "validation corpus");
  cmd_ev->add_option("--k", ev.k, "kNN neighbor count");
  cmd_ev->add_option("--include-templates", ev.include_templates,
                     "insert template vectors into the store");
  cmd_ev->add_flag("--align", ev.align, "apply the alignment MLP to templates");
  cmd_ev->add_option("--out", ev.out_path, "report path");

  AnalyzeArgs an;
  auto* cmd_an = app.add_subcommand("analyze",
      "uniformity/alignment sweep and embedding export");
  cmd_an->add_option("--checkpoint", an.checkpoint_path, "encoder checkpoint")->required();
  cmd_an->add_option("--corpus", an.pairs_path, "augmented training corpus")->required();
  cmd_an->add_option("--templates", an.templates_path, "templates file")->required();
  cmd_an->add_option("--eval", an.eval_path, "evaluation corpus")->required();
  cmd_an->add_option("--lambdas", an.lambdas, "comma-separated lambda values");
  cmd_an->add_option("--render-mode", an.render_mode, "category|slot");
  cmd_an->add_option("--k", an.k, "kNN neighbor count");
  cmd_an->add_option("--include-templates", an.include_templates,
                     "insert template vectors into the store");
  cmd_an->add_flag("--align", an.align, "apply the alignment MLP to templates");
  cmd_an->add_option("--out", an.out_dir, "output directory");

  try {
    app.parse(argc, argv);
    if (cmd_aug->parsed()) return cmd_augment(aug);
    if (cmd_tr->parsed()) {
      apply_config_file(cmd_tr);
      return cmd_train(tr);
    }
    if (cmd_ev->parsed()) return cmd_eval(ev);
    if (cmd_an->parsed()) return cmd_analyze(an);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const CorpusError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
