#include "cgcre/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cgcre/errors.hpp"
#include "cgcre/log.hpp"

namespace cgcre {

using nlohmann::json;

ConcernType concern_type_from_string(const std::string& s) {
  for (int i = 0; i < kNumConcernTypes; ++i) {
    if (s == kConcernTypeNames[i]) return static_cast<ConcernType>(i);
  }
  throw ValidationError("unknown concern type '" + s + "'");
}

RelationLabel relation_label_from_string(const std::string& s) {
  if (s == "CO_OCC") return RelationLabel::CO_OCC;
  if (s == "CA_EFF") return RelationLabel::CA_EFF;
  throw ValidationError("unknown relation label '" + s + "'");
}

std::string tag_name(int tag) {
  if (tag == kTagOutside) return "O";
  int t = (tag - 1) / 2;
  bool begin = ((tag - 1) % 2) == 0;
  return std::string(begin ? "B-" : "I-") + kConcernTypeNames[t];
}

void validate_tweet(const Tweet& tweet) {
  const std::string where = "tweet '" + tweet.id + "': ";
  const int n = tweet.length();
  if (n < 1) throw ValidationError(where + "tokens must be non-empty");
  if (n > kMaxTweetLength) {
    throw ValidationError(where + "length " + std::to_string(n) + " exceeds cap " +
                          std::to_string(kMaxTweetLength));
  }
  if (tweet.retweet_count < 0) throw ValidationError(where + "retweet_count is negative");
  if (!(tweet.sentiment_polarity >= -1.0 && tweet.sentiment_polarity <= 1.0)) {
    throw ValidationError(where + "sentiment_polarity out of [-1,1]");
  }
  // Dependency heads must form a tree: every head index in range, exactly one
  // self-headed root, and every token's head chain reaches it without cycling.
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const Token& tok = tweet.tokens[i];
    if (tok.index != i) throw ValidationError(where + "token index field out of order");
    if (tok.dep_head < 0 || tok.dep_head >= n) {
      throw ValidationError(where + "dep_head out of range at token " + std::to_string(i));
    }
    if (tok.dep_head == i) ++roots;
  }
  if (roots != 1) {
    throw ValidationError(where + "dependency graph must have exactly one root, found " +
                          std::to_string(roots));
  }
  for (int i = 0; i < n; ++i) {
    int cur = i;
    int steps = 0;
    while (tweet.tokens[cur].dep_head != cur) {
      cur = tweet.tokens[cur].dep_head;
      if (++steps > n) {
        throw ValidationError(where + "dependency cycle reached from token " + std::to_string(i));
      }
    }
  }
  // Spans: in range, non-overlapping.
  std::vector<int> owner(n, -1);
  for (std::size_t s = 0; s < tweet.concerns.size(); ++s) {
    const ConcernSpan& sp = tweet.concerns[s];
    if (!(0 <= sp.start && sp.start < sp.end && sp.end <= n)) {
      throw ValidationError(where + "concern span [" + std::to_string(sp.start) + "," +
                            std::to_string(sp.end) + ") out of range");
    }
    for (int i = sp.start; i < sp.end; ++i) {
      if (owner[i] != -1) {
        throw ValidationError(where + "concern spans overlap at token " + std::to_string(i));
      }
      owner[i] = static_cast<int>(s);
    }
  }
  // Relations: valid distinct endpoints, one per unordered pair.
  std::vector<std::pair<int, int>> seen;
  for (const RelationAnnotation& r : tweet.relations) {
    const int c = static_cast<int>(tweet.concerns.size());
    if (r.subject < 0 || r.subject >= c || r.object < 0 || r.object >= c) {
      throw ValidationError(where + "relation endpoint index out of range");
    }
    if (r.subject == r.object) throw ValidationError(where + "relation endpoints must differ");
    std::pair<int, int> key = std::minmax(r.subject, r.object);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw ValidationError(where + "duplicate relation over one concern pair");
    }
    seen.push_back(key);
  }
}

namespace {

// Canonical order: concerns sorted by start offset, relations subject-first.
void canonicalize(Tweet& tweet) {
  std::vector<int> order(tweet.concerns.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return tweet.concerns[a].start < tweet.concerns[b].start;
  });
  std::vector<int> rank(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i);
  std::vector<ConcernSpan> sorted;
  sorted.reserve(tweet.concerns.size());
  for (int idx : order) sorted.push_back(tweet.concerns[idx]);
  tweet.concerns = std::move(sorted);
  for (RelationAnnotation& r : tweet.relations) {
    r.subject = rank[r.subject];
    r.object = rank[r.object];
    if (r.subject > r.object) std::swap(r.subject, r.object);
  }
  std::sort(tweet.relations.begin(), tweet.relations.end(),
            [](const RelationAnnotation& a, const RelationAnnotation& b) {
              return std::make_pair(a.subject, a.object) < std::make_pair(b.subject, b.object);
            });
}

const std::vector<std::string> kKnownKeys = {
    "id",       "tokens",        "pos",      "dep_head", "dep_label",
    "retweet_count", "sentiment_polarity", "concerns", "relations"};

Tweet parse_tweet_line(const json& j, int line_no) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  if (!j.is_object()) throw ParseError(where + "expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), it.key()) == kKnownKeys.end()) {
      log_info("ignoring unknown key '" + it.key() + "' on line " + std::to_string(line_no));
    }
  }
  Tweet t;
  try {
    t.id = j.at("id").get<std::string>();
    auto texts = j.at("tokens").get<std::vector<std::string>>();
    auto pos = j.at("pos").get<std::vector<std::string>>();
    auto heads = j.at("dep_head").get<std::vector<int>>();
    auto labels = j.at("dep_label").get<std::vector<std::string>>();
    if (pos.size() != texts.size() || heads.size() != texts.size() ||
        labels.size() != texts.size()) {
      throw ValidationError("tweet '" + t.id + "': token-aligned arrays have unequal lengths");
    }
    t.tokens.resize(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      t.tokens[i] = Token{texts[i], static_cast<int>(i), pos[i], heads[i], labels[i]};
    }
    t.retweet_count = j.at("retweet_count").get<long long>();
    t.sentiment_polarity = j.at("sentiment_polarity").get<double>();
    if (j.contains("concerns")) {
      for (const json& c : j.at("concerns")) {
        ConcernSpan sp;
        sp.start = c.at("start").get<int>();
        sp.end = c.at("end").get<int>();
        sp.ctype = concern_type_from_string(c.at("type").get<std::string>());
        if (c.contains("score")) {
          const double score = c.at("score").get<double>();
          if (!(score >= 0.0 && score <= 1.0)) {
            throw ValidationError("tweet '" + t.id + "': concern score out of [0,1]");
          }
          sp.score = score;
        }
        t.concerns.push_back(sp);
      }
    }
    if (j.contains("relations")) {
      for (const json& r : j.at("relations")) {
        RelationAnnotation rel;
        rel.subject = r.at("subject").get<int>();
        rel.object = r.at("object").get<int>();
        rel.label = relation_label_from_string(r.at("label").get<std::string>());
        t.relations.push_back(rel);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(where + e.what());
  }
  validate_tweet(t);
  canonicalize(t);
  return t;
}

}  // namespace

Corpus load_corpus(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    corpus.tweets.push_back(parse_tweet_line(j, line_no));
  }
  if (split == Split::train && !corpus.tweets.empty()) {
    corpus.rt_min = corpus.tweets[0].retweet_count;
    corpus.rt_max = corpus.tweets[0].retweet_count;
    for (const Tweet& t : corpus.tweets) {
      corpus.rt_min = std::min(corpus.rt_min, t.retweet_count);
      corpus.rt_max = std::max(corpus.rt_max, t.retweet_count);
    }
  }
  return corpus;
}

std::string serialize_corpus(const Corpus& corpus) {
  std::ostringstream out;
  for (const Tweet& t : corpus.tweets) {
    json j;
    j["id"] = t.id;
    json tokens = json::array(), pos = json::array(), heads = json::array(),
         labels = json::array();
    for (const Token& tok : t.tokens) {
      tokens.push_back(tok.text);
      pos.push_back(tok.pos);
      heads.push_back(tok.dep_head);
      labels.push_back(tok.dep_label);
    }
    j["tokens"] = tokens;
    j["pos"] = pos;
    j["dep_head"] = heads;
    j["dep_label"] = labels;
    j["retweet_count"] = t.retweet_count;
    j["sentiment_polarity"] = t.sentiment_polarity;
    json concerns = json::array();
    for (const ConcernSpan& c : t.concerns) {
      json entry = {{"start", c.start},
                    {"end", c.end},
                    {"type", kConcernTypeNames[static_cast<int>(c.ctype)]}};
      if (c.score.has_value()) entry["score"] = *c.score;
      concerns.push_back(entry);
    }
    j["concerns"] = concerns;
    json relations = json::array();
    for (const RelationAnnotation& r : t.relations) {
      relations.push_back({{"subject", r.subject},
                           {"object", r.object},
                           {"label", kRelationLabelNames[static_cast<int>(r.label)]}});
    }
    j["relations"] = relations;
    out << j.dump() << "\n";
  }
  return out.str();
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file '" + path + "'");
  out << serialize_corpus(corpus);
}

double normalize_retweets(long long rt, long long rt_min, long long rt_max) {
  if (rt_max <= rt_min) return 0.0;
  double v = static_cast<double>(rt - rt_min) / static_cast<double>(rt_max - rt_min);
  return std::clamp(v, 0.0, 1.0);
}

double concern_score(double sentiment_polarity, double normalized_retweet, double theta) {
  if (!(sentiment_polarity >= -1.0 && sentiment_polarity <= 1.0)) {
    throw DomainError("concern_score: sentiment polarity out of [-1,1]");
  }
  if (!(normalized_retweet >= 0.0 && normalized_retweet <= 1.0)) {
    throw DomainError("concern_score: normalized retweet out of [0,1]");
  }
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw DomainError("concern_score: theta out of [0,1]");
  }
  return (1.0 - theta) * std::abs(sentiment_polarity) + theta * normalized_retweet;
}

TagSequence spans_to_tags(int length, const std::vector<ConcernSpan>& spans) {
  TagSequence tags(static_cast<std::size_t>(length), kTagOutside);
  for (const ConcernSpan& sp : spans) {
    if (!(0 <= sp.start && sp.start < sp.end && sp.end <= length)) {
      throw ValidationError("span out of range in spans_to_tags");
    }
    for (int i = sp.start; i < sp.end; ++i) {
      if (tags[i] != kTagOutside) throw ValidationError("overlapping spans in spans_to_tags");
      tags[i] = i == sp.start ? tag_begin(sp.ctype) : tag_inside(sp.ctype);
    }
  }
  return tags;
}

TagSequence spans_to_tags(const Tweet& tweet) {
  return spans_to_tags(tweet.length(), tweet.concerns);
}

std::vector<ConcernSpan> tags_to_spans(const TagSequence& tags) {
  std::vector<ConcernSpan> spans;
  int open_start = -1;
  ConcernType open_type = ConcernType::FIN;
  auto close = [&](int end) {
    if (open_start >= 0) {
      spans.push_back(ConcernSpan{open_start, end, open_type, std::nullopt});
      open_start = -1;
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const int tag = tags[i];
    if (tag == kTagOutside) {
      close(static_cast<int>(i));
      continue;
    }
    const ConcernType t = static_cast<ConcernType>((tag - 1) / 2);
    const bool begin = ((tag - 1) % 2) == 0;
    if (begin) {
      close(static_cast<int>(i));
      open_start = static_cast<int>(i);
      open_type = t;
    } else {
      // I-t: continues a same-type run, otherwise repaired to B-t.
      if (open_start >= 0 && open_type == t) continue;
      close(static_cast<int>(i));
      open_start = static_cast<int>(i);
      open_type = t;
    }
  }
  close(static_cast<int>(tags.size()));
  return spans;
}

}  // namespace cgcre
