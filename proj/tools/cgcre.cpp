// cgcre: joint concern/relation extraction engine.
//
// Subcommands: train, eval, predict, gradcheck, cg dump.
// Exit codes: 0 success, 1 input/validation error, 2 numeric error,
// 3 verification failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgcre/concern_graph.hpp"
#include "cgcre/corpus.hpp"
#include "cgcre/errors.hpp"
#include "cgcre/eval.hpp"
#include "cgcre/gradcheck.hpp"
#include "cgcre/log.hpp"
#include "cgcre/model.hpp"
#include "cgcre/train.hpp"

namespace fs = std::filesystem;
using namespace cgcre;

namespace {

// Merged view of defaults, config-file values, and command-line overrides.
struct RunConfig {
  TrainConfig train;
  std::string train_path;
  std::string test_path;
  std::string checkpoint_path;
  std::string out_dir;
  std::string ablate;           // "", "cg", "shared-state"
  double predict_theta = -1.0;  // <0 means: use the checkpoint's theta
  bool with_graph = false;
  bool with_scores = false;
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Line-oriented `key = value` config with '#' comments.
void apply_config_file(RunConfig& rc, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "train") rc.train_path = value;
      else if (key == "test") rc.test_path = value;
      else if (key == "embeddings") rc.train.embeddings_path = value;
      else if (key == "checkpoint") rc.checkpoint_path = value;
      else if (key == "out") rc.out_dir = value;
      else if (key == "seed") rc.train.seed = std::stoull(value);
      else if (key == "epochs") rc.train.epochs = std::stoi(value);
      else if (key == "batch") rc.train.batch_size = std::stoi(value);
      else if (key == "lr") rc.train.optimizer.lr = std::stod(value);
      else if (key == "alpha") rc.train.alpha = std::stod(value);
      else if (key == "theta") rc.train.model.theta = std::stod(value);
      else if (key == "dropout") rc.train.model.dropout_ratio = std::stod(value);
      else if (key == "embed_dim") rc.train.model.embed_dim = std::stoi(value);
      else if (key == "lstm_hidden") rc.train.model.lstm_hidden = std::stoi(value);
      else if (key == "gcn_hidden") rc.train.model.gcn_hidden = std::stoi(value);
      else if (key == "gcn_layers") rc.train.model.gcn_layers = std::stoi(value);
      else if (key == "cls_hidden") rc.train.model.cls_hidden = std::stoi(value);
      else if (key == "dev_fraction") rc.train.dev_fraction = std::stod(value);
      else if (key == "candidate_activation")
        rc.train.model.candidate_activation = candidate_activation_from_string(value);
      else if (key == "use_cg") rc.train.model.use_cg = value == "true" || value == "1";
      else if (key == "use_shared_state")
        rc.train.model.use_shared_state = value == "true" || value == "1";
      else log_info("config: ignoring unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ParseError("config line " + std::to_string(line_no) + ": bad value for '" + key + "'");
    }
  }
}

std::string effective_config_text(const RunConfig& rc) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "train = " << rc.train_path << "\n";
  os << "test = " << rc.test_path << "\n";
  os << "embeddings = " << rc.train.embeddings_path << "\n";
  os << "checkpoint = " << rc.checkpoint_path << "\n";
  os << "out = " << rc.out_dir << "\n";
  os << "seed = " << rc.train.seed << "\n";
  os << "epochs = " << rc.train.epochs << "\n";
  os << "batch = " << rc.train.batch_size << "\n";
  os << "lr = " << num(rc.train.optimizer.lr) << "\n";
  os << "alpha = " << num(rc.train.alpha) << "\n";
  os << "theta = " << num(rc.train.model.theta) << "\n";
  os << "dropout = " << num(rc.train.model.dropout_ratio) << "\n";
  os << "embed_dim = " << rc.train.model.embed_dim << "\n";
  os << "lstm_hidden = " << rc.train.model.lstm_hidden << "\n";
  os << "gcn_hidden = " << rc.train.model.gcn_hidden << "\n";
  os << "gcn_layers = " << rc.train.model.gcn_layers << "\n";
  os << "cls_hidden = " << rc.train.model.cls_hidden << "\n";
  os << "dev_fraction = " << num(rc.train.dev_fraction) << "\n";
  os << "candidate_activation = "
     << (rc.train.model.candidate_activation == CandidateActivation::sigmoid ? "sigmoid" : "tanh")
     << "\n";
  os << "use_cg = " << (rc.train.model.use_cg ? "true" : "false") << "\n";
  os << "use_shared_state = " << (rc.train.model.use_shared_state ? "true" : "false") << "\n";
  return os.str();
}

std::string default_out_dir(std::uint64_t seed) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::localtime(&t));
  return std::string("runs/") + stamp + "-seed" + std::to_string(seed);
}

void prepare_out_dir(RunConfig& rc) {
  if (rc.out_dir.empty()) rc.out_dir = default_out_dir(rc.train.seed);
  fs::create_directories(rc.out_dir);
  std::ofstream cfg(rc.out_dir + "/effective_config.txt");
  cfg << effective_config_text(rc);
  log_info("outputs in " + rc.out_dir);
}

CgCreModel build_model(const RunConfig& rc, const Corpus& corpus) {
  CorpusVocabs vocabs = collect_vocabs(corpus);
  if (!rc.train.embeddings_path.empty()) {
    WordEmbedding emb =
        WordEmbedding::from_file(rc.train.embeddings_path, rc.train.model.embed_dim);
    return CgCreModel(rc.train.model, std::move(emb), vocabs.cg, rc.train.seed);
  }
  return CgCreModel(rc.train.model, vocabs.words, vocabs.cg, rc.train.seed);
}

void write_loss_log(const std::string& path, const TrainResult& result) {
  std::ofstream out(path);
  out << "epoch,batch,L,L_c,L_r\n";
  char buf[160];
  for (const BatchLossRow& row : result.batch_log) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", row.epoch, row.batch, row.total,
                  row.concern, row.relation);
    out << buf;
  }
}

int cmd_train(RunConfig rc) {
  if (rc.train_path.empty()) throw DataError("train: no training data path given (--train)");
  validate_config(rc.train);
  prepare_out_dir(rc);
  Corpus corpus = load_corpus(rc.train_path, Split::train);

  std::unique_ptr<CgCreModel> model;
  std::unique_ptr<Trainer> trainer;
  long long rt_min = corpus.rt_min, rt_max = corpus.rt_max;
  if (!rc.checkpoint_path.empty()) {
    // Resume: model, optimizer moments and RNG streams from the checkpoint;
    // the epoch target may be overridden by the current invocation.
    LoadedCheckpoint loaded = load_checkpoint(rc.checkpoint_path);
    TrainConfig resumed = loaded.config;
    resumed.epochs = rc.train.epochs;
    model = std::move(loaded.model);
    trainer = std::make_unique<Trainer>(*model, resumed);
    trainer->optimizer().first_moments() = loaded.adam_m;
    trainer->optimizer().second_moments() = loaded.adam_v;
    trainer->restore(loaded.state.next_epoch, loaded.state.shuffle_state,
                     loaded.state.dropout_state, loaded.state.adam_step);
    rt_min = loaded.rt_min;
    rt_max = loaded.rt_max;
    corpus.rt_min = rt_min;
    corpus.rt_max = rt_max;
    rc.train = resumed;
  } else {
    model = std::make_unique<CgCreModel>(build_model(rc, corpus));
    trainer = std::make_unique<Trainer>(*model, rc.train);
  }

  TrainResult result = trainer->train(corpus);
  write_loss_log(rc.out_dir + "/loss_log.csv", result);
  for (const EpochLoss& e : result.epoch_log) {
    log_info("epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.total));
  }
  save_checkpoint(rc.out_dir + "/model.ckpt", *model, rc.train, rt_min, rt_max,
                  trainer->optimizer(),
                  TrainerState{trainer->next_epoch(), trainer->shuffle_state(),
                               trainer->dropout_state(), trainer->optimizer().step_count()});
  return 0;
}

std::pair<std::unique_ptr<CgCreModel>, LoadedCheckpoint> load_model(const RunConfig& rc) {
  if (rc.checkpoint_path.empty()) throw DataError("no checkpoint path given (--checkpoint)");
  LoadedCheckpoint loaded = load_checkpoint(rc.checkpoint_path);
  std::unique_ptr<CgCreModel> model = std::move(loaded.model);
  if (rc.ablate == "cg") {
    model->set_ablation(false, model->config().use_shared_state);
  } else if (rc.ablate == "shared-state") {
    model->set_ablation(model->config().use_cg, false);
  } else if (!rc.ablate.empty()) {
    throw ConfigError("--ablate must be 'cg' or 'shared-state'");
  }
  return {std::move(model), std::move(loaded)};
}

int cmd_eval(RunConfig rc) {
  if (rc.test_path.empty()) throw DataError("eval: no test data path given (--test)");
  auto [model, loaded] = load_model(rc);
  rc.train = loaded.config;
  prepare_out_dir(rc);
  Corpus corpus = load_corpus(rc.test_path, Split::test);
  corpus.rt_min = loaded.rt_min;
  corpus.rt_max = loaded.rt_max;
  EvalReport report = evaluate(*model, corpus);

  nlohmann::json j = nlohmann::json::parse(report_json(report));
  j["ablation"] = rc.ablate.empty() ? "none" : rc.ablate;
  std::ofstream out(rc.out_dir + "/report.json");
  out << j.dump(2) << "\n";
  std::printf("%s", report_table(report).c_str());
  if (!rc.ablate.empty()) std::printf("(ablation: %s)\n", rc.ablate.c_str());
  return 0;
}

nlohmann::json graph_to_json(const ConcernGraph& graph, const std::string& tweet_id) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const CgNode& node : graph.nodes) {
    nlohmann::json n;
    switch (node.kind) {
      case CgNode::Kind::Concern: {
        n["kind"] = "concern";
        const ConcernSpan& span = graph.spans[node.span_index];
        n["span"] = {{"start", span.start},
                     {"end", span.end},
                     {"type", kConcernTypeNames[static_cast<int>(span.ctype)]}};
        n["head_dep"] = node.head_dep;
        n["head_pos"] = node.head_pos;
        break;
      }
      case CgNode::Kind::Attribute:
        n["kind"] = "attribute";
        n["attribute"] = node.attr_kind == CgNode::AttrKind::Type ? "type" : "score";
        if (node.attr_kind == CgNode::AttrKind::Type) {
          n["value"] = kConcernTypeNames[static_cast<int>(node.attr_type)];
        } else {
          n["value"] = node.attr_score;
        }
        break;
      case CgNode::Kind::Relation:
        n["kind"] = "relation";
        n["label"] = kRelationLabelNames[static_cast<int>(node.rel_label)];
        break;
    }
    nodes.push_back(n);
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [from, to] : graph.edges) edges.push_back({from, to});
  return nlohmann::json{{"id", tweet_id}, {"nodes", nodes}, {"edges", edges}};
}

int cmd_predict(RunConfig rc) {
  if (rc.test_path.empty()) throw DataError("predict: no input data path given (--test)");
  auto [model, loaded] = load_model(rc);
  rc.train = loaded.config;
  prepare_out_dir(rc);
  Corpus corpus = load_corpus(rc.test_path, Split::test);
  corpus.rt_min = loaded.rt_min;
  corpus.rt_max = loaded.rt_max;
  const double theta = rc.predict_theta >= 0.0 ? rc.predict_theta : loaded.config.model.theta;

  Corpus output = corpus;
  std::ofstream graphs;
  if (rc.with_graph) graphs.open(rc.out_dir + "/graphs.jsonl");
  for (std::size_t i = 0; i < corpus.tweets.size(); ++i) {
    const Tweet& tweet = corpus.tweets[i];
    const double rt_norm = normalize_retweets(tweet.retweet_count, corpus.rt_min, corpus.rt_max);
    Prediction pred = model->predict(tweet, rt_norm);
    if (rc.with_scores) {
      const double cs = concern_score(tweet.sentiment_polarity, rt_norm, theta);
      for (ConcernSpan& span : pred.concerns) span.score = cs;
    }
    output.tweets[i].concerns = pred.concerns;
    output.tweets[i].relations = pred.relations;
    if (rc.with_graph) {
      ConcernGraph graph =
          build_concern_graph(tweet, pred.concerns, pred.relations, rt_norm, theta);
      graphs << graph_to_json(graph, tweet.id).dump() << "\n";
    }
  }
  save_corpus(output, rc.out_dir + "/predictions.jsonl");
  return 0;
}

int cmd_gradcheck(const std::vector<std::string>& components, const std::string& corrupt) {
  auto results = run_gradcheck(components, 1e-5, corrupt);
  bool all_passed = true;
  for (const GradCheckResult& r : results) {
    std::printf("%-12s max relative error %.3e  %s\n", r.component.c_str(), r.max_rel_error,
                r.passed ? "ok" : "FAIL");
    all_passed = all_passed && r.passed;
  }
  if (!all_passed) {
    for (const GradCheckResult& r : results) {
      if (!r.passed) log_error("gradient check failed in component '" + r.component + "'");
    }
    return 3;
  }
  return 0;
}

int cmd_cg_dump(RunConfig rc) {
  if (rc.train_path.empty()) throw DataError("cg dump: no data path given (--train)");
  Corpus corpus = load_corpus(rc.train_path, Split::train);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!rc.out_dir.empty()) {
    fs::create_directories(rc.out_dir);
    file.open(rc.out_dir + "/cg_dump.jsonl");
    out = &file;
  }
  for (const Tweet& tweet : corpus.tweets) {
    const double rt_norm = normalize_retweets(tweet.retweet_count, corpus.rt_min, corpus.rt_max);
    ConcernGraph graph = build_concern_graph(tweet, rt_norm, rc.train.model.theta);
    (*out) << graph_to_json(graph, tweet.id).dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint concern and concern-relation extraction engine"};
  app.require_subcommand(1);

  std::string config_path;
  RunConfig cli;  // values provided on the command line
  bool seed_set = false, epochs_set = false, batch_set = false, lr_set = false, alpha_set = false,
       theta_set = false, embeddings_set = false;
  std::uint64_t seed = 0;
  int epochs = 0, batch = 0;
  double lr = 0, alpha = 0, theta = 0;
  std::string embeddings;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "line-oriented key = value config file");
    cmd->add_option("--train", cli.train_path, "training data (JSON-lines)");
    cmd->add_option("--test", cli.test_path, "test/input data (JSON-lines)");
    cmd->add_option("--embeddings", embeddings, "precomputed embedding file")
        ->each([&](const std::string&) { embeddings_set = true; });
    cmd->add_option("--checkpoint", cli.checkpoint_path, "checkpoint path");
    cmd->add_option("--out", cli.out_dir,
                    "output directory (default runs/<timestamp>-seed<seed>)");
    cmd->add_option("--seed", seed, "run seed")->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--epochs", epochs, "training epochs")
        ->each([&](const std::string&) { epochs_set = true; });
    cmd->add_option("--batch", batch, "batch size")
        ->each([&](const std::string&) { batch_set = true; });
    cmd->add_option("--lr", lr, "learning rate")->each([&](const std::string&) { lr_set = true; });
    cmd->add_option("--alpha", alpha, "relation loss weight")
        ->each([&](const std::string&) { alpha_set = true; });
    cmd->add_option("--theta", theta, "concern score weight")
        ->each([&](const std::string&) { theta_set = true; });
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd);
  std::string ablate;
  eval_cmd->add_option("--ablate", ablate, "zero a feature at evaluation: cg | shared-state");

  CLI::App* predict_cmd = app.add_subcommand("predict", "annotate an input file");
  add_common(predict_cmd);
  predict_cmd->add_option("--ablate", ablate, "zero a feature: cg | shared-state");
  bool with_graph = false, with_scores = false;
  predict_cmd->add_flag("--with-graph", with_graph, "dump per-tweet concern graphs");
  predict_cmd->add_flag("--scores", with_scores, "fill concern scores using theta");

  CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference verification");
  std::vector<std::string> components;
  std::string corrupt;
  gradcheck_cmd->add_option("--component", components, "check only these components (default: all)");
  gradcheck_cmd->add_option("--corrupt-gradient", corrupt,
                            "test hook: inject a doubled gradient into a component");

  CLI::App* cg_cmd = app.add_subcommand("cg", "concern graph utilities");
  cg_cmd->require_subcommand(1);
  CLI::App* dump_cmd = cg_cmd->add_subcommand("dump", "export graphs as JSON node/edge lists");
  add_common(dump_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    RunConfig rc;
    if (!config_path.empty()) apply_config_file(rc, config_path);
    // Command-line values override file values.
    if (!cli.train_path.empty()) rc.train_path = cli.train_path;
    if (!cli.test_path.empty()) rc.test_path = cli.test_path;
    if (!cli.checkpoint_path.empty()) rc.checkpoint_path = cli.checkpoint_path;
    if (!cli.out_dir.empty()) rc.out_dir = cli.out_dir;
    if (embeddings_set) rc.train.embeddings_path = embeddings;
    if (seed_set) rc.train.seed = seed;
    if (epochs_set) rc.train.epochs = epochs;
    if (batch_set) rc.train.batch_size = batch;
    if (lr_set) rc.train.optimizer.lr = lr;
    if (alpha_set) rc.train.alpha = alpha;
    if (theta_set) {
      rc.train.model.theta = theta;
      rc.predict_theta = theta;
    }
    rc.ablate = ablate;
    rc.with_graph = with_graph;
    rc.with_scores = with_scores;

    if (train_cmd->parsed()) return cmd_train(std::move(rc));
    if (eval_cmd->parsed()) return cmd_eval(std::move(rc));
    if (predict_cmd->parsed()) return cmd_predict(std::move(rc));
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(components, corrupt);
    if (cg_cmd->parsed() && dump_cmd->parsed()) return cmd_cg_dump(std::move(rc));
    return 1;
  } catch (const NumericError& e) {
    log_error(e.what());
    return 2;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
}
