#include "nmar/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "nmar/eval.hpp"

namespace nmar {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json dims_json(const EncoderDims& d) {
  return json{{"word_dim", d.word_dim},       {"pos_dim", d.pos_dim}, {"num_filters", d.num_filters},
              {"window", d.window},           {"max_offset", d.max_offset}};
}

void dims_from_json(const json& j, EncoderDims& d) {
  d.word_dim = j.value("word_dim", d.word_dim);
  d.pos_dim = j.value("pos_dim", d.pos_dim);
  d.num_filters = j.value("num_filters", d.num_filters);
  d.window = j.value("window", d.window);
  d.max_offset = j.value("max_offset", d.max_offset);
}

}  // namespace

void to_json(json& j, const RunConfig& c) {
  json synth = c.synth;
  synth.erase("seed");
  const auto& t = c.trainer;
  j = json{{"seed", c.seed},
           {"out", c.out},
           {"paths",
            {{"corpus", c.corpus},
             {"dev", c.dev},
             {"checkpoint", c.checkpoint},
             {"vectors", c.vectors},
             {"dev_vectors", c.dev_vectors},
             {"preds_a", c.preds_a},
             {"preds_b", c.preds_b}}},
           {"hyperparams", c.hp},
           {"trainer",
            {{"trainer", std::string(to_string(t.trainer))},
             {"model_mode", std::string(to_string(t.model_mode))},
             {"representation", std::string(to_string(t.representation))},
             {"epochs", t.epochs},
             {"weighting", t.weighting},
             {"solver",
              {{"kind", std::string(to_string(t.solver.kind))},
               {"restarts", t.solver.restarts},
               {"astar_node_cap", t.solver.astar_node_cap},
               {"exhaustive_budget", t.solver.exhaustive_budget}}},
             {"dims", dims_json(t.dims)}}},
           {"synth", synth},
           {"splits", {{"dev_bags", c.dev_bags}, {"test_bags", c.test_bags}}},
           {"compare", {{"iterations", c.iterations}}}};
}

void from_json(const json& j, RunConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  c.seed = j.value("seed", c.seed);
  c.out = j.value("out", c.out);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    c.corpus = p.value("corpus", c.corpus);
    c.dev = p.value("dev", c.dev);
    c.checkpoint = p.value("checkpoint", c.checkpoint);
    c.vectors = p.value("vectors", c.vectors);
    c.dev_vectors = p.value("dev_vectors", c.dev_vectors);
    c.preds_a = p.value("preds_a", c.preds_a);
    c.preds_b = p.value("preds_b", c.preds_b);
  }
  if (j.contains("hyperparams")) from_json(j.at("hyperparams"), c.hp);
  if (j.contains("trainer")) {
    const auto& t = j.at("trainer");
    auto& tc = c.trainer;
    if (t.contains("trainer")) tc.trainer = parse_trainer(t.at("trainer").get<std::string>());
    if (t.contains("model_mode")) tc.model_mode = parse_model_mode(t.at("model_mode").get<std::string>());
    if (t.contains("representation"))
      tc.representation = parse_representation(t.at("representation").get<std::string>());
    tc.epochs = t.value("epochs", tc.epochs);
    tc.weighting = t.value("weighting", tc.weighting);
    if (t.contains("solver")) {
      const auto& s = t.at("solver");
      if (s.contains("kind")) tc.solver.kind = parse_solver(s.at("kind").get<std::string>());
      tc.solver.restarts = s.value("restarts", tc.solver.restarts);
      tc.solver.astar_node_cap = s.value("astar_node_cap", tc.solver.astar_node_cap);
      tc.solver.exhaustive_budget = s.value("exhaustive_budget", tc.solver.exhaustive_budget);
    }
    if (t.contains("dims")) dims_from_json(t.at("dims"), tc.dims);
  }
  if (j.contains("synth")) {
    json s = j.at("synth");
    if (s.is_object()) s.erase("seed");
    from_json(s, c.synth);
  }
  if (j.contains("splits")) {
    c.dev_bags = j.at("splits").value("dev_bags", c.dev_bags);
    c.test_bags = j.at("splits").value("test_bags", c.test_bags);
  }
  if (j.contains("compare")) c.iterations = j.at("compare").value("iterations", c.iterations);
}

namespace {

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err), color_(std::getenv("NO_COLOR") == nullptr) {}

  void info(const std::string& msg) { line("info", "\033[36m", msg); }
  void error(const std::string& msg) { line("error", "\033[31m", msg); }

 private:
  void line(const char* level, const char* code, const std::string& msg) {
    if (color_) err_ << code << level << "\033[0m: " << msg << '\n';
    else err_ << level << ": " << msg << '\n';
  }

  std::ostream& err_;
  bool color_;
};

/// Flag registrations that are applied on top of the file config once parsing
/// has finished, so that flags win over the file regardless of order.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& desc,
                   std::function<void(RunConfig&, const T&)> set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    appliers_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
    return opt;
  }

  void apply(RunConfig& c) const {
    for (const auto& f : appliers_) f(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

struct Common {
  std::string config_path;
  Overrides overrides;
};

void add_common(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_path, "JSON config file (flags override it)");
  common.overrides.add<std::uint64_t>(app, "--seed", "Random seed", [](RunConfig& c, auto v) { c.seed = v; });
  common.overrides.add<std::string>(app, "--out", "Output directory", [](RunConfig& c, auto v) { c.out = v; });
}

void add_model_flags(CLI::App* app, Overrides& o) {
  o.add<double>(app, "--mu", "Weight of the KB agreement factors", [](RunConfig& c, auto v) { c.hp.mu = v; });
  o.add<double>(app, "--alpha-t", "Penalty for an observed fact that is not extracted",
                [](RunConfig& c, auto v) { c.hp.alpha_t = v; });
  o.add<double>(app, "--alpha-d", "Penalty for an extracted fact that is not observed",
                [](RunConfig& c, auto v) { c.hp.alpha_d = v; });
  o.add<bool>(app, "--freq-scaling", "Scale penalties by entity popularity",
              [](RunConfig& c, auto v) { c.hp.freq_scaling = v; });
  o.add<std::string>(app, "--representation", "learned_pcnn or fixed_vectors",
                     [](RunConfig& c, auto v) { c.trainer.representation = parse_representation(v); });
  o.add<std::string>(app, "--vectors", "Fixed sentence vectors for --corpus",
                     [](RunConfig& c, auto v) { c.vectors = v; });
}

void add_inference_flags(CLI::App* app, Overrides& o) {
  o.add<std::string>(app, "--checkpoint", "Checkpoint file", [](RunConfig& c, auto v) { c.checkpoint = v; });
  o.add<std::string>(app, "--corpus", "Corpus (JSONL)", [](RunConfig& c, auto v) { c.corpus = v; });
  o.add<std::string>(app, "--vectors", "Fixed sentence vectors", [](RunConfig& c, auto v) { c.vectors = v; });
}

RunConfig resolve(const Common& common) {
  RunConfig c;
  if (!common.config_path.empty()) {
    json j;
    try {
      j = json::parse(read_file(common.config_path));
    } catch (const json::exception& e) {
      throw DataError(common.config_path + ": " + e.what());
    }
    from_json(j, c);
  }
  common.overrides.apply(c);
  c.synth.seed = c.seed;
  c.trainer.seed = c.seed;
  return c;
}

void persist_config(const RunConfig& c, const std::string& command) {
  fs::create_directories(c.out);
  json j = c;
  j["command"] = command;
  write_file(fs::path(c.out) / "config.json", j.dump(2) + "\n");
}

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw std::invalid_argument(std::string("missing required ") + flag);
}

// ---------------------------------------------------------------------------

json split_summary(const std::string& split, const SyntheticCorpus& sc) {
  long sentences = 0, positive = 0, true_facts = 0, observed = 0, gold_relations = 0;
  for (std::size_t b = 0; b < sc.corpus.bags.size(); ++b) {
    const Bag& bag = sc.corpus.bags[b];
    sentences += bag.size();
    const long t = std::count(sc.true_facts[b].begin(), sc.true_facts[b].end(), 1);
    positive += t > 0;
    true_facts += t;
    observed += std::count(bag.observed.begin(), bag.observed.end(), 1);
    for (const auto& g : bag.gold) gold_relations += g && *g != sc.corpus.na();
  }
  return json{{"split", split},
              {"bags", sc.corpus.bags.size()},
              {"sentences", sentences},
              {"positive_bags", positive},
              {"true_facts", true_facts},
              {"observed_facts", observed},
              {"dropped_facts", true_facts - observed},
              {"relation_mentions", gold_relations}};
}

int cmd_synth(const RunConfig& c, std::ostream& out, Logger& log) {
  c.synth.validate();
  if (c.dev_bags < 0 || c.test_bags < 0) throw std::invalid_argument("split sizes must be non-negative");
  persist_config(c, "synth");
  struct Split {
    const char* name;
    int bags;
    std::uint64_t seed_offset;
  };
  const Split splits[] = {{"train", c.synth.num_bags, 0}, {"dev", c.dev_bags, 1}, {"test", c.test_bags, 2}};
  for (const auto& s : splits) {
    if (s.bags == 0) continue;
    SynthSpec spec = c.synth;
    spec.num_bags = s.bags;
    spec.seed = c.seed + 0x9E3779B97F4A7C15ULL * s.seed_offset;
    const SyntheticCorpus sc = generate_synthetic(spec);
    const fs::path dir(c.out);
    save_corpus(sc.corpus, dir / (std::string(s.name) + ".jsonl"));
    save_true_facts(sc, dir / (std::string(s.name) + "_facts.jsonl"));
    out << split_summary(s.name, sc).dump() << '\n';
    log.info(std::string("wrote ") + s.name + " split (" + std::to_string(s.bags) + " bags) to " + c.out);
  }
  return 0;
}

int cmd_train(const RunConfig& c, Logger& log) {
  require_path(c.corpus, "--corpus");
  c.trainer.validate();
  c.hp.validate();
  const Corpus corpus = load_corpus(c.corpus);
  std::optional<Corpus> dev;
  if (!c.dev.empty()) {
    const CorpusSchema schema{corpus.relation_names, corpus.vocab};
    dev = load_corpus(c.dev, &schema);
  }
  std::optional<FixedVectors> train_vec, dev_vec;
  if (c.trainer.representation == Representation::fixed_vectors) {
    require_path(c.vectors, "--vectors");
    train_vec = load_fixed_vectors(c.vectors, corpus);
    if (dev) {
      require_path(c.dev_vectors, "--dev-vectors");
      dev_vec = load_fixed_vectors(c.dev_vectors, *dev);
    }
  }
  persist_config(c, "train");

  TrainInputs in{&corpus, dev ? &*dev : nullptr, train_vec ? &*train_vec : nullptr, dev_vec ? &*dev_vec : nullptr};
  std::ostringstream train_log;
  const fs::path dir(c.out);
  TrainResult result;
  try {
    result = train(in, c.trainer, c.hp, [&](const EpochMetrics& m) {
      const std::string line = format_epoch_line(m);
      train_log << line << '\n';
      log.info(line);
    });
  } catch (const NonFiniteError& e) {
    write_file(dir / "train.log", train_log.str());
    write_file(dir / "diagnostics.txt", std::string(e.what()) + "\n");
    throw;
  }
  write_file(dir / "train.log", train_log.str());

  Checkpoint ck{c.trainer.representation, result.params, corpus.relation_names, corpus.vocab.words(), c.hp};
  save_checkpoint(ck, dir / "checkpoint.json");
  log.info("checkpoint from epoch " + std::to_string(result.best_epoch) + " written to " +
           (dir / "checkpoint.json").string());
  return 0;
}

struct Loaded {
  Checkpoint ck;
  Corpus corpus;
  std::optional<FixedVectors> vectors;
};

/// Reads a checkpoint and a corpus, checking that their shapes agree before
/// the corpus is re-read against the checkpoint's relation set and vocabulary.
Loaded load_for_inference(const RunConfig& c) {
  require_path(c.checkpoint, "--checkpoint");
  require_path(c.corpus, "--corpus");
  Loaded l;
  l.ck = load_checkpoint(c.checkpoint);
  const int R = static_cast<int>(l.ck.relation_names.size());
  const auto& theta = l.ck.params.theta;
  const Corpus raw = load_corpus(c.corpus);
  for (const auto& name : raw.relation_names) {
    if (std::find(l.ck.relation_names.begin(), l.ck.relation_names.end(), name) == l.ck.relation_names.end() ||
        raw.num_relations() > R) {
      std::ostringstream ss;
      ss << "shape mismatch: checkpoint expects " << R << " relations (theta " << theta.rows() << "x"
         << theta.cols() << "), corpus " << c.corpus << " has " << raw.num_relations()
         << " relations including '" << name << "'";
      throw ShapeError(ss.str());
    }
  }
  const CorpusSchema schema{l.ck.relation_names, Vocabulary(l.ck.vocab)};
  l.corpus = load_corpus(c.corpus, &schema);
  if (l.ck.representation == Representation::fixed_vectors) {
    require_path(c.vectors, "--vectors");
    l.vectors = load_fixed_vectors(c.vectors, l.corpus);
    if (l.vectors->dim != theta.cols()) {
      std::ostringstream ss;
      ss << "shape mismatch: checkpoint expects sentence vectors of dimension " << theta.cols() << ", "
         << c.vectors << " has dimension " << l.vectors->dim;
      throw ShapeError(ss.str());
    }
  }
  return l;
}

int cmd_predict(const RunConfig& c, Logger& log) {
  const Loaded l = load_for_inference(c);
  persist_config(c, "predict");
  const auto preds = predict_mentions(l.corpus, l.ck.params, l.vectors ? &*l.vectors : nullptr);
  const fs::path path = fs::path(c.out) / "predictions.jsonl";
  write_predictions(preds, l.corpus, path);
  log.info("wrote " + std::to_string(preds.size()) + " predictions to " + path.string());
  return 0;
}

json auc_or_null(const std::optional<PRCurve>& curve) { return curve ? json(curve->auc) : json(nullptr); }

int cmd_eval(const RunConfig& c, std::ostream& out, Logger& log) {
  const Loaded l = load_for_inference(c);
  persist_config(c, "eval");
  const fs::path dir(c.out);
  const auto preds = predict_mentions(l.corpus, l.ck.params, l.vectors ? &*l.vectors : nullptr);
  write_predictions(preds, l.corpus, dir / "predictions.jsonl");

  json metrics;
  const PRCurve held = heldout_pr(preds, l.corpus);
  write_pr_csv(held, dir / "heldout.csv");
  metrics["auc_heldout"] = held.auc;
  metrics["heldout_positives"] = held.positives;

  if (l.corpus.has_gold()) {
    const PRCurve sent = sentential_pr(preds, l.corpus);
    write_pr_csv(sent, dir / "sentential.csv");
    metrics["auc_sentential"] = sent.auc;
    metrics["sentential_positives"] = sent.positives;
    json pan = json::object();
    for (int r = 0; r < l.corpus.num_relations(); ++r) {
      json per = json::object();
      for (int n : {100, 500}) {
        const auto p = p_at_n(preds, l.corpus, r, n);
        per[std::to_string(n)] = {{"precision", p.precision}, {"considered", p.considered}, {"truncated", p.truncated}};
      }
      pan[l.corpus.relation_name(r)] = per;
    }
    metrics["p_at_n"] = pan;
    const KbSplit split = in_out_kb_split(preds, l.corpus);
    metrics["auc_in_kb"] = auc_or_null(split.in_kb);
    metrics["auc_out_kb"] = auc_or_null(split.out_kb);
    metrics["in_kb_gold"] = split.in_gold;
    metrics["out_kb_gold"] = split.out_gold;
  } else {
    std::error_code ec;
    fs::remove(dir / "sentential.csv", ec);
    metrics["note"] = "corpus has no gold mention labels; sentential metrics omitted";
    log.info("no gold mention labels in " + c.corpus + "; sentential metrics omitted");
  }
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  out << metrics.dump() << '\n';
  return 0;
}

int cmd_compare(const RunConfig& c, std::ostream& out, Logger& log) {
  require_path(c.preds_a, "--a");
  require_path(c.preds_b, "--b");
  require_path(c.corpus, "--gold");
  if (c.iterations < 1) throw std::invalid_argument("iterations must be positive");
  const Corpus gold = load_corpus(c.corpus);
  if (!gold.has_gold()) throw std::invalid_argument(c.corpus + " carries no gold mention labels");
  const auto a = read_predictions(c.preds_a, gold);
  const auto b = read_predictions(c.preds_b, gold);
  persist_config(c, "compare");
  const BootstrapResult r = paired_bootstrap(a, b, gold, c.iterations, c.seed);
  const json report{{"p_value", r.p_value}, {"auc_a", r.auc_a}, {"auc_b", r.auc_b}, {"iterations", r.iterations}};
  write_file(fs::path(c.out) / "compare.json", report.dump(2) + "\n");
  out << report.dump() << '\n';
  log.info("p=" + std::to_string(r.p_value) + " that B matches or beats A");
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Logger log(err);
  CLI::App app{"Distant-supervision relation extraction with missing-data-aware training"};
  app.name("nmar");
  app.require_subcommand(1);

  Common synth_c, train_c, predict_c, eval_c, compare_c;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with gold labels and true facts");
  add_common(synth, synth_c);
  {
    auto& o = synth_c.overrides;
    o.add<int>(synth, "--bags", "Training bags", [](RunConfig& c, auto v) { c.synth.num_bags = v; });
    o.add<int>(synth, "--dev-bags", "Dev bags (0 to skip)", [](RunConfig& c, auto v) { c.dev_bags = v; });
    o.add<int>(synth, "--test-bags", "Test bags (0 to skip)", [](RunConfig& c, auto v) { c.test_bags = v; });
    o.add<int>(synth, "--relations", "Relation types", [](RunConfig& c, auto v) { c.synth.num_relations = v; });
    o.add<int>(synth, "--entities", "Entity inventory size", [](RunConfig& c, auto v) { c.synth.num_entities = v; });
    o.add<double>(synth, "--missingness", "Base probability that a true fact is missing from the KB",
                  [](RunConfig& c, auto v) { c.synth.missingness.base = v; });
    o.add<double>(synth, "--popularity-slope", "Reduction of the drop rate for popular entities",
                  [](RunConfig& c, auto v) { c.synth.missingness.popularity_slope = v; });
    o.add<double>(synth, "--p-signal", "Probability a relation sentence carries its signal token",
                  [](RunConfig& c, auto v) { c.synth.p_signal = v; });
    o.add<double>(synth, "--large-bag-fraction", "Fraction of bags forced to the large size",
                  [](RunConfig& c, auto v) { c.synth.large_bag_fraction = v; });
    o.add<int>(synth, "--large-bag-size", "Size of large bags", [](RunConfig& c, auto v) { c.synth.large_bag_size = v; });
  }

  auto* train_cmd = app.add_subcommand("train", "Train a model and write the best-dev checkpoint");
  add_common(train_cmd, train_c);
  {
    auto& o = train_c.overrides;
    o.add<std::string>(train_cmd, "--corpus", "Training corpus (JSONL)", [](RunConfig& c, auto v) { c.corpus = v; });
    o.add<std::string>(train_cmd, "--dev", "Dev corpus with gold labels", [](RunConfig& c, auto v) { c.dev = v; });
    o.add<std::string>(train_cmd, "--dev-vectors", "Fixed sentence vectors for --dev",
                       [](RunConfig& c, auto v) { c.dev_vectors = v; });
    add_model_flags(train_cmd, o);
    o.add<int>(train_cmd, "--epochs", "Training epochs", [](RunConfig& c, auto v) { c.trainer.epochs = v; });
    o.add<std::string>(train_cmd, "--trainer", "sgd_hinge, perceptron or mira",
                       [](RunConfig& c, auto v) { c.trainer.trainer = parse_trainer(v); });
    o.add<std::string>(train_cmd, "--mode", "nmar or hard_constraint",
                       [](RunConfig& c, auto v) { c.trainer.model_mode = parse_model_mode(v); });
    o.add<std::string>(train_cmd, "--solver", "local_search, astar or exhaustive",
                       [](RunConfig& c, auto v) { c.trainer.solver.kind = parse_solver(v); });
    o.add<int>(train_cmd, "--restarts", "Local search restarts", [](RunConfig& c, auto v) {
      c.trainer.solver.restarts = v;
      c.hp.restarts = v;
    });
    o.add<std::string>(train_cmd, "--loss", "zero_one, relation_hamming or mention_hamming",
                       [](RunConfig& c, auto v) { c.hp.loss_variant = parse_loss_variant(v); });
    o.add<double>(train_cmd, "--lr", "SGD learning rate", [](RunConfig& c, auto v) { c.hp.learning_rate = v; });
    o.add<double>(train_cmd, "--beta1", "Bag size below which weight is 1", [](RunConfig& c, auto v) { c.hp.beta1 = v; });
    o.add<double>(train_cmd, "--beta2", "Bag-size weight decay", [](RunConfig& c, auto v) { c.hp.beta2 = v; });
    o.add<bool>(train_cmd, "--weighting", "Bag-size weighting of the hinge (true/false)",
                [](RunConfig& c, auto v) { c.trainer.weighting = v; });
    o.add<double>(train_cmd, "--mira-cap", "MIRA step cap C", [](RunConfig& c, auto v) { c.hp.mira_cap = v; });
    o.add<int>(train_cmd, "--word-dim", "Word embedding size", [](RunConfig& c, auto v) { c.trainer.dims.word_dim = v; });
    o.add<int>(train_cmd, "--pos-dim", "Position embedding size", [](RunConfig& c, auto v) { c.trainer.dims.pos_dim = v; });
    o.add<int>(train_cmd, "--filters", "Convolution filters", [](RunConfig& c, auto v) { c.trainer.dims.num_filters = v; });
    o.add<int>(train_cmd, "--window", "Convolution window", [](RunConfig& c, auto v) { c.trainer.dims.window = v; });
    o.add<int>(train_cmd, "--max-offset", "Position clip radius",
               [](RunConfig& c, auto v) { c.trainer.dims.max_offset = v; });
  }

  auto* predict_cmd = app.add_subcommand("predict", "Write per-sentence predictions for a corpus");
  add_common(predict_cmd, predict_c);
  add_inference_flags(predict_cmd, predict_c.overrides);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
  add_common(eval_cmd, eval_c);
  add_inference_flags(eval_cmd, eval_c.overrides);

  auto* compare_cmd = app.add_subcommand("compare", "Paired bootstrap test between two prediction files");
  add_common(compare_cmd, compare_c);
  compare_c.overrides.add<std::string>(compare_cmd, "--a", "Baseline predictions",
                                       [](RunConfig& c, auto v) { c.preds_a = v; });
  compare_c.overrides.add<std::string>(compare_cmd, "--b", "Candidate predictions",
                                       [](RunConfig& c, auto v) { c.preds_b = v; });
  compare_c.overrides.add<std::string>(compare_cmd, "--gold", "Corpus with gold mention labels",
                                       [](RunConfig& c, auto v) { c.corpus = v; });
  compare_c.overrides.add<int>(compare_cmd, "--iterations", "Bootstrap resamples",
                               [](RunConfig& c, auto v) { c.iterations = v; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    log.error(e.what());
    err << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(resolve(synth_c), out, log);
    if (train_cmd->parsed()) return cmd_train(resolve(train_c), log);
    if (predict_cmd->parsed()) return cmd_predict(resolve(predict_c), log);
    if (eval_cmd->parsed()) return cmd_eval(resolve(eval_c), out, log);
    if (compare_cmd->parsed()) return cmd_compare(resolve(compare_c), out, log);
  } catch (const std::invalid_argument& e) {
    log.error(e.what());
    return 2;
  } catch (const DataError& e) {
    log.error(e.what());
    return 2;
  } catch (const std::exception& e) {
    log.error(e.what());
    return 1;
  }
  return 2;
}

}  // namespace nmar
