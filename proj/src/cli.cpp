#include "dcsr/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "dcsr/corpus.hpp"
#include "dcsr/encoder.hpp"
#include "dcsr/errors.hpp"
#include "dcsr/index.hpp"
#include "dcsr/kernels.hpp"
#include "dcsr/retrieval.hpp"
#include "dcsr/sampler.hpp"
#include "dcsr/synth.hpp"
#include "dcsr/trainer.hpp"

namespace dcsr::cli {

namespace {

using nlohmann::json;

constexpr const char* kToolVersion = "1.0.0";

void use_stderr_logger() {
  static const bool installed = [] {
    auto logger = spdlog::stderr_color_mt("dcsr");
    logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)installed;
}

std::vector<QAExample> load_examples(const std::string& path) {
  auto loaded = load_dataset(path);
  if (loaded.dropped > 0) {
    spdlog::warn("{}: dropped {} examples without an answer-bearing positive", path, loaded.dropped);
  }
  spdlog::info("{}: {} examples", path, loaded.examples.size());
  return std::move(loaded.examples);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path);
  out << text << '\n';
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      const auto k = std::stoul(item);
      if (k == 0) throw std::invalid_argument("zero");
      ks.push_back(k);
    } catch (const std::logic_error&) {
      fail(ErrorKind::RangeError, "invalid k '" + item + "'");
    }
  }
  if (ks.empty()) fail(ErrorKind::RangeError, "--ks needs at least one value");
  return ks;
}

PassageStore passage_store(const std::string& passages_path, const std::vector<QAExample>& dataset) {
  if (!passages_path.empty()) return PassageStore(load_passages(passages_path));
  spdlog::info("no --passages given; answer checks use the passages named in the dataset");
  return PassageStore(collect_passages(dataset));
}

struct StatsArgs {
  std::string dataset;
  std::string dev;
  std::string out;
};

struct TrainArgs {
  std::vector<std::string> train;
  std::string dev;
  std::size_t epochs = 40;
  double lr = 0.05;
  std::size_t batch_size = 16;
  std::string strategy = "inpassage+bm25";
  std::uint64_t seed = 0;
  std::string out;
  std::size_t dim = kDefaultDim;
  std::size_t features = kDefaultFeatureSpace;
  double alpha = kDefaultContextBlend;
  double init_scale = kDefaultInitScale;
  std::string init_checkpoint;
  std::size_t eval_every = 0;
  std::size_t pool = 128;
};

struct IndexArgs {
  std::string passages;
  std::string dataset;
  std::string vectors;
  std::string checkpoint;
  std::string out;
  std::string export_vectors;
  std::size_t first_n = 0;
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

struct SearchArgs {
  std::string index;
  std::string checkpoint;
  std::string query;
  std::size_t top = 100;
  std::size_t depth = 0;
};

struct EvalArgs {
  std::string index;
  std::string dataset;
  std::string checkpoint;
  std::string passages;
  std::string ks = "1,5,20,100";
  std::string json_out;
  std::size_t depth = 0;
  std::string granularity = "sentence";
};

struct MineArgs {
  std::string index;
  std::string dataset;
  std::string checkpoint;
  std::string passages;
  std::size_t per_question = 1;
  std::string out;
  std::size_t depth = 0;
  std::string mode = "replace";
};

struct SynthArgs {
  SynthSpec spec;
  std::string distribution = "3:1.0";
  std::string out_passages;
  std::string out_dataset;
};

int run_stats(const StatsArgs& a, std::ostream& out) {
  const auto train = load_examples(a.dataset);
  const auto stats = conflict_stats(train);
  json result = json::parse(conflict_stats_json(stats));
  if (!a.dev.empty()) {
    const auto overlap = overlap_stats(train, load_examples(a.dev));
    result["title_overlap"] = overlap.title_overlap;
    result["passage_overlap"] = overlap.passage_overlap;
  }
  out << result.dump() << '\n';
  if (!a.out.empty()) write_text(a.out, result.dump());
  return 0;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  const auto variant = parse_variant(a.strategy);
  if (!variant) fail(ErrorKind::RangeError, "unknown strategy " + a.strategy);

  std::vector<QAExample> train_set;
  if (a.train.size() == 1) {
    train_set = load_examples(a.train.front());
  } else {
    std::vector<std::vector<QAExample>> members;
    for (const auto& path : a.train) members.push_back(load_examples(path));
    train_set = concatenate_datasets(std::move(members), a.seed);
  }
  const auto dev_set = a.dev.empty() ? std::vector<QAExample>{} : load_examples(a.dev);

  TrainConfig config;
  config.learning_rate = a.lr;
  config.epochs = a.epochs;
  config.batch_size = a.batch_size;
  config.strategy = {*variant, a.seed};
  config.seed = a.seed;
  config.eval_every = a.eval_every;
  config.dim = a.dim;
  config.feature_space = a.features;
  config.context_blend = a.alpha;
  config.init_scale = a.init_scale;
  config.validation_pool_questions = a.pool;
  config.out_dir = a.out;
  if (!a.init_checkpoint.empty()) config.initial = load_params(a.init_checkpoint);

  const auto report = train(train_set, dev_set, config);
  for (const auto& record : report.epochs) out << epoch_record_json(record) << '\n';
  spdlog::info("training finished in {:.2f}s; final checkpoint {}", report.wall_seconds,
               report.final_checkpoint->string());
  return 0;
}

int run_index(const IndexArgs& a) {
  SentenceIndex index;
  if (!a.vectors.empty()) {
    index = import_vectors(a.vectors);
  } else {
    if (a.checkpoint.empty()) fail(ErrorKind::RangeError, "--checkpoint is required unless --vectors is given");
    std::vector<Passage> passages;
    if (!a.passages.empty()) {
      passages = load_passages(a.passages);
    } else if (!a.dataset.empty()) {
      passages = collect_passages(load_examples(a.dataset));
    } else {
      fail(ErrorKind::RangeError, "one of --passages, --dataset or --vectors is required");
    }
    if (a.first_n > 0) passages = subsample_corpus(passages, FirstN{a.first_n});
    if (a.fraction > 0.0) passages = subsample_corpus(passages, Fraction{a.fraction, a.seed});
    index = build_index(passages, load_params(a.checkpoint));
  }
  save_index(a.out, index);
  if (!a.export_vectors.empty()) export_vectors(a.export_vectors, index);
  spdlog::info("indexed {} sentences over {} passages (k = {:.3f})", index.size(), index.distinct_passages(),
               index.avg_sentences_per_passage());
  return 0;
}

int run_search(const SearchArgs& a, std::ostream& out) {
  const auto index = load_index(a.index);
  const auto params = load_params(a.checkpoint);
  const auto query = encode_question(a.query, params);
  const std::size_t depth = a.depth > 0 ? a.depth : index.default_depth();
  const auto ranked = rank_passages(index, query, depth, a.top);
  json passages = json::array();
  for (const auto& e : ranked.entries) {
    json sentences = json::array();
    for (const auto& s : e.sentences) {
      sentences.push_back({{"ordinal", s.ordinal}, {"score", s.score}, {"probability", s.probability}});
    }
    passages.push_back({{"id", e.passage_id}, {"has_ans", e.has_ans_probability}, {"sentences", sentences}});
  }
  out << json{{"question", a.query},
              {"retrieved_sentences", ranked.retrieved_sentences},
              {"shortfall", ranked.shortfall},
              {"passages", passages}}
             .dump()
      << '\n';
  return 0;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  const auto index = load_index(a.index);
  const auto params = load_params(a.checkpoint);
  const auto dataset = load_examples(a.dataset);
  const auto store = passage_store(a.passages, dataset);
  EvalOptions options;
  options.ks = parse_ks(a.ks);
  options.depth = a.depth;
  options.granularity = a.granularity == "passage" ? Granularity::Passage : Granularity::Sentence;
  const auto report = evaluate(dataset, index, params, store, options);
  const auto text = eval_report_json(report);
  out << text << '\n';
  if (!a.json_out.empty()) write_text(a.json_out, text);
  return 0;
}

int run_mine(const MineArgs& a) {
  const auto index = load_index(a.index);
  const auto params = load_params(a.checkpoint);
  const auto dataset = load_examples(a.dataset);
  const auto store = passage_store(a.passages, dataset);
  MiningOptions options;
  options.per_question = a.per_question;
  options.depth = a.depth;
  options.mode = a.mode == "augment" ? MiningMode::Augment : MiningMode::Replace;
  const auto result = mine_hard_negatives(dataset, index, params, store, options);
  write_dataset(a.out, result.examples);
  spdlog::info("mined {} negatives; {} questions kept their original negatives", result.mined,
               result.questions_without_mined);
  return 0;
}

int run_synth(SynthArgs a) {
  a.spec.questions_per_passage = parse_distribution(a.distribution);
  const auto corpus = synthesize(a.spec);
  write_passages(a.out_passages, corpus.passages);
  write_dataset(a.out_dataset, corpus.examples);
  spdlog::info("wrote {} passages and {} questions", corpus.passages.size(), corpus.examples.size());
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  use_stderr_logger();

  CLI::App app{"Sentence-granular dense retrieval: train, index, search and evaluate", "dcsr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("dcsr ") + kToolVersion + " (checkpoint format v" +
                                        std::to_string(kCheckpointVersion) + ", index format v" +
                                        std::to_string(kIndexVersion) + ")");
  app.set_config("--config", "", "Read options from an INI or TOML file");
  int threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads")->check(CLI::NonNegativeNumber);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Conflict and train/dev overlap statistics");
  stats_cmd->add_option("--dataset", stats.dataset, "Dataset file")->required();
  stats_cmd->add_option("--dev", stats.dev, "Dev dataset for overlap statistics");
  stats_cmd->add_option("--out", stats.out, "Also write the JSON here");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the toy bi-encoder");
  train_cmd->add_option("--train", tr.train, "Training dataset; repeat for the Multi setting")->required();
  train_cmd->add_option("--dev", tr.dev, "Dev dataset for validation accuracy");
  train_cmd->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.lr)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch-size", tr.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--strategy", tr.strategy)->check(CLI::IsMember({"bm25x1", "bm25x2", "inpassage+bm25"}));
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--dim", tr.dim)->check(CLI::PositiveNumber);
  train_cmd->add_option("--features", tr.features, "Hashed feature space (power of two)");
  train_cmd->add_option("--alpha", tr.alpha, "Sentence/passage feature blend")->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--init-scale", tr.init_scale, "Typical norm of freshly initialized vectors")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--init-checkpoint", tr.init_checkpoint, "Continue from this checkpoint");
  train_cmd->add_option("--eval-every", tr.eval_every, "Extra validation every N steps");
  train_cmd->add_option("--pool", tr.pool, "Questions per validation pool")->check(CLI::PositiveNumber);

  IndexArgs ix;
  auto* index_cmd = app.add_subcommand("index", "Build a sentence index");
  index_cmd->add_option("--passages", ix.passages, "Passage collection file");
  index_cmd->add_option("--dataset", ix.dataset, "Index the passages named in a dataset");
  index_cmd->add_option("--vectors", ix.vectors, "Import externally computed DVEC vectors");
  index_cmd->add_option("--checkpoint", ix.checkpoint, "Encoder checkpoint");
  index_cmd->add_option("--out", ix.out, "Index file")->required();
  index_cmd->add_option("--export-vectors", ix.export_vectors, "Also write the rows as a DVEC file");
  index_cmd->add_option("--first-n", ix.first_n, "Keep only the first N passages");
  index_cmd->add_option("--fraction", ix.fraction, "Keep a seeded uniform fraction of passages")
      ->check(CLI::Range(0.0, 1.0));
  index_cmd->add_option("--seed", ix.seed);

  SearchArgs se;
  auto* search_cmd = app.add_subcommand("search", "Rank passages for one question");
  search_cmd->add_option("--index", se.index)->required();
  search_cmd->add_option("--checkpoint", se.checkpoint)->required();
  search_cmd->add_option("--query", se.query)->required();
  search_cmd->add_option("--top", se.top, "Passages to return")->check(CLI::PositiveNumber);
  search_cmd->add_option("--depth", se.depth, "Sentences to retrieve (default ceil(100 k))");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Top-k retrieval accuracy");
  eval_cmd->add_option("--index", ev.index)->required();
  eval_cmd->add_option("--dataset", ev.dataset)->required();
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--passages", ev.passages, "Passage texts for answer checks");
  eval_cmd->add_option("--ks", ev.ks);
  eval_cmd->add_option("--json", ev.json_out, "Write the report here");
  eval_cmd->add_option("--depth", ev.depth);
  eval_cmd->add_option("--granularity", ev.granularity)->check(CLI::IsMember({"sentence", "passage"}));

  MineArgs mi;
  auto* mine_cmd = app.add_subcommand("mine-negatives", "Mine sentence-level hard negatives");
  mine_cmd->add_option("--index", mi.index)->required();
  mine_cmd->add_option("--dataset", mi.dataset)->required();
  mine_cmd->add_option("--checkpoint", mi.checkpoint)->required();
  mine_cmd->add_option("--passages", mi.passages);
  mine_cmd->add_option("--per-question", mi.per_question);
  mine_cmd->add_option("--out", mi.out)->required();
  mine_cmd->add_option("--depth", mi.depth);
  mine_cmd->add_option("--mode", mi.mode)->check(CLI::IsMember({"replace", "augment"}));

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus and dataset");
  synth_cmd->add_option("--passages", sy.spec.passages)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sentences", sy.spec.sentences_per_passage)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--topics", sy.spec.topics)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--qpp", sy.distribution, "Questions per passage, e.g. 3:1.0 or 1:0.5,2:0.5");
  synth_cmd->add_option("--seed", sy.spec.seed);
  synth_cmd->add_option("--vocab", sy.spec.vocabulary_per_topic)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--words", sy.spec.words_per_sentence)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--question-words", sy.spec.words_per_question)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out-passages", sy.out_passages)->required();
  synth_cmd->add_option("--out-dataset", sy.out_dataset)->required();

  std::vector<const char*> argv;
  argv.push_back("dcsr");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    // --help and --version
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  spdlog::set_level(spdlog::level::from_str(log_level));
  if (threads > 0) kernels::set_threads(threads);

  try {
    if (*stats_cmd) return run_stats(stats, out);
    if (*train_cmd) return run_train(tr, out);
    if (*index_cmd) return run_index(ix);
    if (*search_cmd) return run_search(se, out);
    if (*eval_cmd) return run_eval(ev, out);
    if (*mine_cmd) return run_mine(mi);
    if (*synth_cmd) return run_synth(sy);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace dcsr::cli
