#pragma once

#include <string>
#include <vector>

#include "cgcre/corpus.hpp"
#include "cgcre/model.hpp"

namespace cgcre {

struct MetricBlock {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long gold = 0;
  long long predicted = 0;
  long long correct = 0;
};

// Pair-correctness evaluation: concern metrics over exact span matches,
// relation metrics gated on both endpoint spans being exactly correct.
struct EvalReport {
  MetricBlock concern;
  MetricBlock relation;
};

// Exact boundary+type matching; each gold span matches at most once.
int match_concerns(const std::vector<ConcernSpan>& gold, const std::vector<ConcernSpan>& predicted);

// A predicted relation is correct iff both endpoint spans exactly match gold
// spans and gold annotates that unordered pair with the same label.
int match_relations(const std::vector<ConcernSpan>& gold_spans,
                    const std::vector<RelationAnnotation>& gold_relations,
                    const std::vector<ConcernSpan>& predicted_spans,
                    const std::vector<RelationAnnotation>& predicted_relations);

// Micro-averaged aggregation from per-tweet (gold, predicted) annotation
// pairs; P := 0 when nothing was predicted.
struct TweetPrediction {
  const Tweet* gold = nullptr;
  Prediction predicted;
};
EvalReport aggregate_report(const std::vector<TweetPrediction>& outcomes);

// Runs the two-pass prediction path over the corpus and aggregates.
EvalReport evaluate(const CgCreModel& model, const Corpus& corpus);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace cgcre
