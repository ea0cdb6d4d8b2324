#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace cgcre {

// The eight concern types and two relation labels the engine recognizes.
enum class ConcernType { FIN, GOV, DIS, MED, PER, LOC, FOD, DAT };
inline constexpr int kNumConcernTypes = 8;
inline constexpr std::array<const char*, kNumConcernTypes> kConcernTypeNames = {
    "FIN", "GOV", "DIS", "MED", "PER", "LOC", "FOD", "DAT"};

enum class RelationLabel { CO_OCC, CA_EFF };
inline constexpr std::array<const char*, 2> kRelationLabelNames = {"CO_OCC", "CA_EFF"};

ConcernType concern_type_from_string(const std::string& s);
RelationLabel relation_label_from_string(const std::string& s);

// BIO tag set over the eight types: O plus B-t/I-t per type, 17 tags total.
inline constexpr int kNumTags = 1 + 2 * kNumConcernTypes;
inline constexpr int kTagOutside = 0;
inline int tag_begin(ConcernType t) { return 1 + 2 * static_cast<int>(t); }
inline int tag_inside(ConcernType t) { return 2 + 2 * static_cast<int>(t); }
std::string tag_name(int tag);

struct Token {
  std::string text;
  int index = 0;
  std::string pos;
  int dep_head = 0;   // self-index marks the root
  std::string dep_label;
};

struct ConcernSpan {
  int start = 0;  // inclusive token index
  int end = 0;    // exclusive token index
  ConcernType ctype = ConcernType::FIN;
  std::optional<double> score;  // cs from Eq.-style weighting, when computed

  friend bool operator==(const ConcernSpan& a, const ConcernSpan& b) {
    return a.start == b.start && a.end == b.end && a.ctype == b.ctype;
  }
};

struct RelationAnnotation {
  int subject = 0;  // index into the tweet's concern list; earlier span
  int object = 0;
  RelationLabel label = RelationLabel::CO_OCC;

  friend bool operator==(const RelationAnnotation& a, const RelationAnnotation& b) {
    return a.subject == b.subject && a.object == b.object && a.label == b.label;
  }
};

struct Tweet {
  std::string id;
  std::vector<Token> tokens;
  long long retweet_count = 0;
  double sentiment_polarity = 0.0;
  std::vector<ConcernSpan> concerns;
  std::vector<RelationAnnotation> relations;

  int length() const { return static_cast<int>(tokens.size()); }
};

struct Corpus {
  std::vector<Tweet> tweets;
  // Retweet extremes for normalization; derived from the training split and
  // reused verbatim for test/predict inputs.
  long long rt_min = 0;
  long long rt_max = 0;
};

enum class Split { train, test };

inline constexpr int kMaxTweetLength = 128;

// JSON-lines ingestion. Train split computes rt_min/rt_max from its own
// tweets; test split leaves them zero for the caller to fill from the
// training stats. Annotations (concerns/relations) may be absent.
Corpus load_corpus(const std::string& path, Split split = Split::train);

// One JSON object per line, keys in the documented schema.
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::string& path);

// Min-max normalization with clamping into [0,1]; 0 on a degenerate range.
double normalize_retweets(long long rt, long long rt_min, long long rt_max);

// cs = (1-theta)*|sp| + theta*rt_norm.
double concern_score(double sentiment_polarity, double normalized_retweet, double theta);

using TagSequence = std::vector<int>;

// Gold spans -> one BIO tag per token. Throws on overlapping spans.
TagSequence spans_to_tags(const Tweet& tweet);
TagSequence spans_to_tags(int length, const std::vector<ConcernSpan>& spans);

// BIO tags -> spans; a stray I-t (no preceding B-t/I-t of the same type)
// is repaired by reading it as B-t, so decoding is total.
std::vector<ConcernSpan> tags_to_spans(const TagSequence& tags);

// Validation shared by the loader and by synthetic builders; throws
// ValidationError naming the tweet id and offending field.
void validate_tweet(const Tweet& tweet);

}  // namespace cgcre
