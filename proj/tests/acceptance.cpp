// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Built around the bundled synthetic corpora and the library's
// verification harnesses.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "cgcre/corpus.hpp"
#include "cgcre/crf.hpp"
#include "cgcre/eval.hpp"
#include "cgcre/gradcheck.hpp"
#include "cgcre/model.hpp"
#include "cgcre/rng.hpp"
#include "cgcre/train.hpp"
#include "support/enumeration.hpp"
#include "support/synth.hpp"

using namespace cgcre;

namespace {

int g_failures = 0;

void report(int criterion, bool passed, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", passed ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  if (!passed) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string data_path(const std::string& name) {
  return std::string(CGCRE_DATA_DIR) + "/" + name;
}

// 1. Gradient verification over every layer and end-to-end, under 60 s.
void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  auto results = run_gradcheck();
  const double elapsed = seconds_since(t0);
  bool ok = elapsed < 60.0;
  double worst = 0.0;
  std::string worst_name;
  for (const GradCheckResult& r : results) {
    ok = ok && r.passed;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = r.component;
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail), "worst %s %.2e, tolerance 1e-4, %.1fs",
                worst_name.c_str(), worst, elapsed);
  report(1, ok, "gradcheck passes for every layer and end-to-end", detail);
}

// 2. CRF forward algorithm and Viterbi against brute-force enumeration.
void criterion_crf_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260810);
  bool ok = true;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng.next_int(5);
    const int k = 1 + rng.next_int(5);
    std::vector<double> o(static_cast<std::size_t>(n) * k), t(static_cast<std::size_t>(k) * k);
    for (double& v : o) v = rng.uniform(-2, 2);
    for (double& v : t) v = rng.uniform(-2, 2);
    Tensor emissions = Tensor::from({n, k}, o);
    Tensor transitions = Tensor::from({k, k}, t);
    const double gap =
        std::abs(log_partition(emissions, transitions).value() - oracle::log_partition(o, t, n, k));
    worst_gap = std::max(worst_gap, gap);
    ok = ok && gap < 1e-6;
    auto [best, best_score] = oracle::best_sequence(o, t, n, k);
    TagSequence decoded = viterbi_decode(emissions, transitions);
    ok = ok && oracle::sequence_score(o, t, n, k, decoded) == best_score;
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < 10.0;
  char detail[160];
  std::snprintf(detail, sizeof(detail), "200 instances, worst logZ gap %.2e, %.2fs", worst_gap,
                elapsed);
  report(2, ok, "forward algorithm and Viterbi match enumeration", detail);
}

// 3. Concern score property suite.
void criterion_concern_score() {
  bool ok = true;
  Rng rng(31337);
  for (int trial = 0; trial < 2000 && ok; ++trial) {
    const double sp = rng.uniform(-1, 1);
    const double rt = rng.uniform(0, 1);
    const double theta = rng.uniform(0, 1);
    const double cs = concern_score(sp, rt, theta);
    ok = ok && cs >= 0.0 && cs <= 1.0;
    // Monotonicity in |sp| and rt.
    const double sp_up = sp >= 0 ? std::min(1.0, sp + 0.1) : std::max(-1.0, sp - 0.1);
    ok = ok && concern_score(sp_up, rt, theta) >= cs - 1e-15;
    ok = ok && concern_score(sp, std::min(1.0, rt + 0.1), theta) >= cs - 1e-15;
    // theta boundaries.
    ok = ok && concern_score(sp, rt, 0.0) == std::abs(sp);
    ok = ok && concern_score(sp, rt, 1.0) == rt;
  }
  const bool hand = concern_score(-0.5, 0.25, 0.4) == 0.4;
  ok = ok && hand;
  report(3, ok, "concern score bounds, monotonicity, boundaries and hand value",
         hand ? "cs(-0.5, 0.25, 0.4) == 0.4 exactly" : "hand value mismatch");
}

// 4. Concern Graph structural suite.
void criterion_graph_structure() {
  Rng rng(808);
  bool ok = true;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    Tweet t = synth::random_tweet(rng);
    ConcernGraph g = build_concern_graph(t, rng.next_double(), rng.next_double());
    const std::size_t c = t.concerns.size(), r = t.relations.size();
    ok = ok && g.nodes.size() == 3 * c + r && g.edges.size() == 2 * c + 2 * r;
    for (std::size_t i = 0; i < g.nodes.size() && ok; ++i) {
      if (g.nodes[i].kind == CgNode::Kind::Attribute) {
        ok = g.degree(static_cast<int>(i)) == 1;
      } else if (g.nodes[i].kind == CgNode::Kind::Relation) {
        ok = g.degree(static_cast<int>(i)) == 2;
      }
    }
  }
  report(4, ok, "node/edge counts and degrees match the construction rules",
         "100 random annotation sets");
}

// Shared by criteria 5 and 6: assert the pair-correctness implication on a
// fully evaluated corpus.
bool relation_implication_holds(const CgCreModel& model, const Corpus& corpus) {
  for (const Tweet& tweet : corpus.tweets) {
    const double rt = normalize_retweets(tweet.retweet_count, corpus.rt_min, corpus.rt_max);
    Prediction pred = model.predict(tweet, rt);
    for (const RelationAnnotation& rel : pred.relations) {
      // A relation counted correct must have both endpoint spans correct.
      const bool counted =
          match_relations(tweet.concerns, tweet.relations, pred.concerns, {rel}) == 1;
      if (!counted) continue;
      bool subj_ok = false, obj_ok = false;
      for (const ConcernSpan& g : tweet.concerns) {
        subj_ok = subj_ok || g == pred.concerns[rel.subject];
        obj_ok = obj_ok || g == pred.concerns[rel.object];
      }
      if (!subj_ok || !obj_ok) return false;
    }
  }
  return true;
}

// 5. Overfit run on the bundled 20-tweet corpus with default model size.
void criterion_overfit(bool* implication_ok) {
  const auto t0 = std::chrono::steady_clock::now();
  Corpus corpus = load_corpus(data_path("overfit20.jsonl"), Split::train);
  TrainConfig config;  // defaults: d=300, hidden=300, lr=1e-3, B=8, seed=42
  config.epochs = 200;
  CorpusVocabs vocabs = collect_vocabs(corpus);
  CgCreModel model(config.model, vocabs.words, vocabs.cg, config.seed);
  Trainer trainer(model, config);
  double concern_f1 = 0.0, relation_f1 = 0.0;
  int epochs_used = 0;
  trainer.train(corpus, [&](const EpochLoss& e) {
    epochs_used = e.epoch + 1;
    if ((e.epoch + 1) % 10 != 0) return true;
    EvalReport r = evaluate(model, corpus);
    concern_f1 = r.concern.f1;
    relation_f1 = r.relation.f1;
    return !(concern_f1 >= 0.95 && relation_f1 >= 0.95);
  });
  if (concern_f1 < 0.95 || relation_f1 < 0.95) {
    EvalReport r = evaluate(model, corpus);
    concern_f1 = r.concern.f1;
    relation_f1 = r.relation.f1;
  }
  const double elapsed = seconds_since(t0);
  const bool ok = concern_f1 >= 0.95 && relation_f1 >= 0.95 && elapsed < 300.0;
  *implication_ok = *implication_ok && relation_implication_holds(model, corpus);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "concern F1 %.3f, relation F1 %.3f after %d epochs, %.0fs", concern_f1,
                relation_f1, epochs_used, elapsed);
  report(5, ok, "overfit run reaches F1 >= 0.95 for concerns and relations", detail);
}

// 6. Ablation margins on the feature-targeted corpora, averaged over seeds.
void criterion_ablation(bool* implication_ok) {
  TrainConfig base;
  base.epochs = 100;
  base.model.embed_dim = 128;
  base.model.lstm_hidden = 128;
  base.model.gcn_hidden = 64;
  base.model.cls_hidden = 64;

  auto run = [&](const Corpus& corpus, std::uint64_t seed, bool ablate_cg, double* full_metric,
                 double* ablated_metric, bool want_concern) {
    TrainConfig config = base;
    config.seed = seed;
    CorpusVocabs vocabs = collect_vocabs(corpus);
    CgCreModel model(config.model, vocabs.words, vocabs.cg, seed);
    Trainer trainer(model, config);
    trainer.train(corpus);
    EvalReport full = evaluate(model, corpus);
    *full_metric = want_concern ? full.concern.f1 : full.relation.f1;
    *implication_ok = *implication_ok && relation_implication_holds(model, corpus);
    if (ablate_cg) {
      model.set_ablation(false, true);
    } else {
      model.set_ablation(true, false);
    }
    EvalReport ablated = evaluate(model, corpus);
    *ablated_metric = want_concern ? ablated.concern.f1 : ablated.relation.f1;
    model.set_ablation(true, true);
  };

  const std::vector<std::uint64_t> seeds = {41, 42, 43};
  double cg_full = 0, cg_ablated = 0;
  Corpus cg_corpus = load_corpus(data_path("cg_types.jsonl"), Split::train);
  for (std::uint64_t seed : seeds) {
    double f = 0, a = 0;
    run(cg_corpus, seed, /*ablate_cg=*/true, &f, &a, /*want_concern=*/true);
    cg_full += f / seeds.size();
    cg_ablated += a / seeds.size();
  }
  double ss_full = 0, ss_ablated = 0;
  Corpus ss_corpus = load_corpus(data_path("shared_rel.jsonl"), Split::train);
  for (std::uint64_t seed : seeds) {
    double f = 0, a = 0;
    run(ss_corpus, seed, /*ablate_cg=*/false, &f, &a, /*want_concern=*/false);
    ss_full += f / seeds.size();
    ss_ablated += a / seeds.size();
  }
  const bool ok = (cg_full - cg_ablated >= 0.10) && (ss_full - ss_ablated >= 0.05);
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "cg: full %.3f vs ablated %.3f (need +0.10); shared: full %.3f vs ablated %.3f "
                "(need +0.05); 3 seeds",
                cg_full, cg_ablated, ss_full, ss_ablated);
  report(6, ok, "full model beats both ablations by the required margins", detail);
}

// 7. CLI determinism: identical config and seed give byte-identical loss logs
// and checkpoints.
void criterion_determinism() {
  const std::string cli = CGCRE_CLI_PATH;
  const std::string dir = "/tmp/cgcre_acceptance_det";
  if (std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str()) != 0) {
    report(7, false, "two identical train runs are byte-identical", "workdir setup failed");
    return;
  }
  const std::string common = " --train " + data_path("overfit20.jsonl") +
                             " --seed 9 --epochs 8 --batch 8 2>/dev/null";
  {
    std::ofstream cfg(dir + "/small.conf");
    cfg << "embed_dim = 48\nlstm_hidden = 48\ngcn_hidden = 24\ncls_hidden = 24\n";
  }
  const int rc1 = std::system(
      (cli + " train --config " + dir + "/small.conf --out " + dir + "/a" + common).c_str());
  const int rc2 = std::system(
      (cli + " train --config " + dir + "/small.conf --out " + dir + "/b" + common).c_str());
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  const std::string log_a = slurp(dir + "/a/loss_log.csv");
  const std::string log_b = slurp(dir + "/b/loss_log.csv");
  const std::string ckpt_a = slurp(dir + "/a/model.ckpt");
  const std::string ckpt_b = slurp(dir + "/b/model.ckpt");
  const bool ok = rc1 == 0 && rc2 == 0 && !log_a.empty() && log_a == log_b && !ckpt_a.empty() &&
                  ckpt_a == ckpt_b;
  char detail[160];
  std::snprintf(detail, sizeof(detail), "loss logs %zu bytes %s, checkpoints %zu bytes %s",
                log_a.size(), log_a == log_b ? "identical" : "DIFFER", ckpt_a.size(),
                ckpt_a == ckpt_b ? "identical" : "DIFFER");
  report(7, ok, "two identical train runs are byte-identical", detail);
}

// 8. Metric fixture with hand-computed values.
void criterion_metric_fixture(bool implication_ok) {
  auto tweet_with = [](const std::string& id, int length, std::vector<ConcernSpan> spans,
                       std::vector<RelationAnnotation> relations) {
    Tweet t;
    t.id = id;
    for (int i = 0; i < length; ++i) {
      t.tokens.push_back(Token{"w" + std::to_string(i), i, "N", i == 0 ? 0 : i - 1, "dep"});
    }
    t.concerns = std::move(spans);
    t.relations = std::move(relations);
    validate_tweet(t);
    return t;
  };

  Tweet t1 = tweet_with("f1", 6,
                        {ConcernSpan{0, 2, ConcernType::FIN, std::nullopt},
                         ConcernSpan{3, 4, ConcernType::GOV, std::nullopt}},
                        {RelationAnnotation{0, 1, RelationLabel::CO_OCC}});
  Tweet t2 = tweet_with("f2", 7,
                        {ConcernSpan{1, 2, ConcernType::DIS, std::nullopt},
                         ConcernSpan{4, 6, ConcernType::MED, std::nullopt}},
                        {RelationAnnotation{0, 1, RelationLabel::CA_EFF}});
  Tweet t3 = tweet_with("f3", 8,
                        {ConcernSpan{0, 1, ConcernType::LOC, std::nullopt},
                         ConcernSpan{2, 3, ConcernType::FOD, std::nullopt},
                         ConcernSpan{5, 7, ConcernType::DAT, std::nullopt}},
                        {RelationAnnotation{0, 1, RelationLabel::CO_OCC},
                         RelationAnnotation{1, 2, RelationLabel::CA_EFF}});
  TweetPrediction p1{&t1, {}};
  p1.predicted.concerns = {ConcernSpan{0, 2, ConcernType::FIN, std::nullopt},
                           ConcernSpan{3, 5, ConcernType::GOV, std::nullopt}};
  p1.predicted.relations = {RelationAnnotation{0, 1, RelationLabel::CO_OCC}};
  TweetPrediction p2{&t2, {}};
  p2.predicted.concerns = t2.concerns;
  p2.predicted.relations = {RelationAnnotation{0, 1, RelationLabel::CO_OCC}};
  TweetPrediction p3{&t3, {}};
  p3.predicted.concerns = t3.concerns;
  p3.predicted.relations = {RelationAnnotation{0, 1, RelationLabel::CO_OCC},
                            RelationAnnotation{1, 2, RelationLabel::CA_EFF},
                            RelationAnnotation{0, 2, RelationLabel::CO_OCC}};

  EvalReport r = aggregate_report({p1, p2, p3});
  const bool fixture_ok = r.concern.gold == 7 && r.concern.predicted == 7 &&
                          r.concern.correct == 6 && std::abs(r.concern.f1 - 6.0 / 7.0) < 1e-12 &&
                          r.relation.gold == 4 && r.relation.predicted == 5 &&
                          r.relation.correct == 2 && r.relation.precision == 0.4 &&
                          r.relation.recall == 0.5 && std::abs(r.relation.f1 - 4.0 / 9.0) < 1e-12;
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "concern P=R=F1=6/7, relation P=0.4 R=0.5 F1=4/9: %s; implication on evaluated "
                "corpora: %s",
                fixture_ok ? "exact" : "MISMATCH", implication_ok ? "holds" : "VIOLATED");
  report(8, fixture_ok && implication_ok,
         "hand-built fixture metrics are exact and pair-gating holds", detail);
}

// 9. Round-trips: dataset identity and checkpoint bit-identity.
void criterion_round_trips() {
  bool dataset_ok = true;
  for (const std::string name : {"overfit20.jsonl", "cg_types.jsonl", "shared_rel.jsonl"}) {
    Corpus first = load_corpus(data_path(name), Split::train);
    const std::string tmp = "/tmp/cgcre_acceptance_rt.jsonl";
    save_corpus(first, tmp);
    Corpus second = load_corpus(tmp, Split::train);
    dataset_ok = dataset_ok && serialize_corpus(first) == serialize_corpus(second);
  }

  // Checkpoint: train briefly, save, load, compare forward loss bit-exactly,
  // then save again and compare bytes.
  Corpus corpus = load_corpus(data_path("overfit20.jsonl"), Split::train);
  TrainConfig config;
  config.epochs = 3;
  config.model.embed_dim = 32;
  config.model.lstm_hidden = 32;
  config.model.gcn_hidden = 16;
  config.model.cls_hidden = 16;
  CorpusVocabs vocabs = collect_vocabs(corpus);
  CgCreModel model(config.model, vocabs.words, vocabs.cg, config.seed);
  Trainer trainer(model, config);
  trainer.train(corpus);
  const std::string p1 = "/tmp/cgcre_acceptance_ckpt1.bin";
  const std::string p2 = "/tmp/cgcre_acceptance_ckpt2.bin";
  TrainerState state{trainer.next_epoch(), trainer.shuffle_state(), trainer.dropout_state(),
                     trainer.optimizer().step_count()};
  save_checkpoint(p1, model, config, corpus.rt_min, corpus.rt_max, trainer.optimizer(), state);
  LoadedCheckpoint loaded = load_checkpoint(p1);
  std::vector<const Tweet*> batch;
  for (const Tweet& t : corpus.tweets) batch.push_back(&t);
  Rng d1(0), d2(0);
  const double loss_before =
      joint_loss(batch, model, corpus.rt_min, corpus.rt_max, 1.0, false, d1, nullptr, nullptr)
          .value();
  const double loss_after = joint_loss(batch, *loaded.model, loaded.rt_min, loaded.rt_max, 1.0,
                                       false, d2, nullptr, nullptr)
                                .value();
  Trainer reloaded_trainer(*loaded.model, loaded.config);
  reloaded_trainer.optimizer().first_moments() = loaded.adam_m;
  reloaded_trainer.optimizer().second_moments() = loaded.adam_v;
  save_checkpoint(p2, *loaded.model, loaded.config, loaded.rt_min, loaded.rt_max,
                  reloaded_trainer.optimizer(), loaded.state);
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  const bool ckpt_ok = loss_before == loss_after && slurp(p1) == slurp(p2);
  char detail[160];
  std::snprintf(detail, sizeof(detail), "datasets %s; checkpoint loss %.12g == %.12g, bytes %s",
                dataset_ok ? "identical" : "DIFFER", loss_before, loss_after,
                ckpt_ok ? "identical" : "DIFFER");
  report(9, dataset_ok && ckpt_ok, "dataset and checkpoint round-trips are exact", detail);
}

}  // namespace

int main() {
  bool implication_ok = true;
  criterion_gradients();
  criterion_crf_oracle();
  criterion_concern_score();
  criterion_graph_structure();
  criterion_overfit(&implication_ok);
  criterion_ablation(&implication_ok);
  criterion_determinism();
  criterion_metric_fixture(implication_ok);
  criterion_round_trips();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
