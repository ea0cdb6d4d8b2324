#include "cgcre/eval.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

namespace cgcre {

using nlohmann::json;

int match_concerns(const std::vector<ConcernSpan>& gold,
                   const std::vector<ConcernSpan>& predicted) {
  std::vector<bool> used(gold.size(), false);
  int correct = 0;
  for (const ConcernSpan& p : predicted) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (!used[g] && gold[g] == p) {
        used[g] = true;
        ++correct;
        break;
      }
    }
  }
  return correct;
}

int match_relations(const std::vector<ConcernSpan>& gold_spans,
                    const std::vector<RelationAnnotation>& gold_relations,
                    const std::vector<ConcernSpan>& predicted_spans,
                    const std::vector<RelationAnnotation>& predicted_relations) {
  // Spans are unique within a tweet, so exact-match lookup is unambiguous.
  auto find_gold_span = [&](const ConcernSpan& span) -> int {
    for (std::size_t g = 0; g < gold_spans.size(); ++g) {
      if (gold_spans[g] == span) return static_cast<int>(g);
    }
    return -1;
  };
  int correct = 0;
  for (const RelationAnnotation& pr : predicted_relations) {
    const int gs = find_gold_span(predicted_spans[pr.subject]);
    const int go = find_gold_span(predicted_spans[pr.object]);
    if (gs < 0 || go < 0) continue;  // an endpoint concern is wrong
    const std::pair<int, int> key = std::minmax(gs, go);
    for (const RelationAnnotation& gr : gold_relations) {
      if (std::pair<int, int>(std::minmax(gr.subject, gr.object)) == key && gr.label == pr.label) {
        ++correct;
        break;
      }
    }
  }
  return correct;
}

namespace {

void finish(MetricBlock& m) {
  m.precision = m.predicted > 0 ? static_cast<double>(m.correct) / m.predicted : 0.0;
  m.recall = m.gold > 0 ? static_cast<double>(m.correct) / m.gold : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
}

}  // namespace

EvalReport aggregate_report(const std::vector<TweetPrediction>& outcomes) {
  EvalReport report;
  for (const TweetPrediction& o : outcomes) {
    const Tweet& gold = *o.gold;
    report.concern.gold += static_cast<long long>(gold.concerns.size());
    report.concern.predicted += static_cast<long long>(o.predicted.concerns.size());
    report.concern.correct += match_concerns(gold.concerns, o.predicted.concerns);
    report.relation.gold += static_cast<long long>(gold.relations.size());
    report.relation.predicted += static_cast<long long>(o.predicted.relations.size());
    report.relation.correct += match_relations(gold.concerns, gold.relations,
                                               o.predicted.concerns, o.predicted.relations);
  }
  finish(report.concern);
  finish(report.relation);
  return report;
}

EvalReport evaluate(const CgCreModel& model, const Corpus& corpus) {
  std::vector<TweetPrediction> outcomes;
  outcomes.reserve(corpus.tweets.size());
  for (const Tweet& tweet : corpus.tweets) {
    const double rt_norm = normalize_retweets(tweet.retweet_count, corpus.rt_min, corpus.rt_max);
    outcomes.push_back(TweetPrediction{&tweet, model.predict(tweet, rt_norm)});
  }
  return aggregate_report(outcomes);
}

std::string report_json(const EvalReport& report) {
  json j;
  j["concern"] = {{"p", report.concern.precision},
                  {"r", report.concern.recall},
                  {"f1", report.concern.f1}};
  j["relation"] = {{"p", report.relation.precision},
                   {"r", report.relation.recall},
                   {"f1", report.relation.f1}};
  j["support"] = {{"concern",
                   {{"gold", report.concern.gold},
                    {"predicted", report.concern.predicted},
                    {"correct", report.concern.correct}}},
                  {"relation",
                   {{"gold", report.relation.gold},
                    {"predicted", report.relation.predicted},
                    {"correct", report.relation.correct}}}};
  return j.dump(2);
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  char line[160];
  os << "           precision    recall        f1      gold predicted   correct\n";
  std::snprintf(line, sizeof(line), "concern     %8.4f  %8.4f  %8.4f  %8lld  %8lld  %8lld\n",
                report.concern.precision, report.concern.recall, report.concern.f1,
                report.concern.gold, report.concern.predicted, report.concern.correct);
  os << line;
  std::snprintf(line, sizeof(line), "relation    %8.4f  %8.4f  %8.4f  %8lld  %8lld  %8lld\n",
                report.relation.precision, report.relation.recall, report.relation.f1,
                report.relation.gold, report.relation.predicted, report.relation.correct);
  os << line;
  return os.str();
}

}  // namespace cgcre
