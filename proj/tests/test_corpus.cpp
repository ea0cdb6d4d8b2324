#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "cgcre/corpus.hpp"
#include "cgcre/errors.hpp"
#include "cgcre/rng.hpp"
#include "support/synth.hpp"

using namespace cgcre;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/cgcre_test_") + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

const char* kGoodLine =
    R"({"id": "t1", "tokens": ["masks", "cause", "panic"], "pos": ["NOUN", "VERB", "NOUN"], )"
    R"("dep_head": [1, 1, 1], "dep_label": ["nsubj", "root", "obj"], "retweet_count": 7, )"
    R"("sentiment_polarity": -0.5, "concerns": [{"start": 0, "end": 1, "type": "MED"}, )"
    R"({"start": 2, "end": 3, "type": "DIS"}], "relations": [{"subject": 0, "object": 1, )"
    R"("label": "CA_EFF"}]})";

}  // namespace

TEST_CASE("load_corpus on an empty file") {
  const std::string path = temp_path("empty.jsonl");
  write_file(path, "");
  Corpus c = load_corpus(path);
  CHECK(c.tweets.empty());
  CHECK(c.rt_min == 0);
  CHECK(c.rt_max == 0);
}

TEST_CASE("load_corpus round-trips a well-formed line") {
  const std::string path = temp_path("one.jsonl");
  write_file(path, std::string(kGoodLine) + "\n");
  Corpus c = load_corpus(path);
  REQUIRE(c.tweets.size() == 1);
  const Tweet& t = c.tweets[0];
  CHECK(t.id == "t1");
  CHECK(t.length() == 3);
  CHECK(t.tokens[1].text == "cause");
  CHECK(t.tokens[1].dep_head == 1);
  CHECK(t.retweet_count == 7);
  CHECK(t.sentiment_polarity == -0.5);
  REQUIRE(t.concerns.size() == 2);
  CHECK(t.concerns[0].ctype == ConcernType::MED);
  REQUIRE(t.relations.size() == 1);
  CHECK(t.relations[0].label == RelationLabel::CA_EFF);
  CHECK(c.rt_min == 7);
  CHECK(c.rt_max == 7);

  // load -> serialize -> load is identity.
  const std::string second = temp_path("one_rt.jsonl");
  save_corpus(c, second);
  Corpus c2 = load_corpus(second);
  CHECK(serialize_corpus(c) == serialize_corpus(c2));
  // And our serialization is a byte-stable fixed point.
  const std::string third = temp_path("one_rt2.jsonl");
  save_corpus(c2, third);
  std::ifstream a(second), b(third);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("load_corpus errors carry line numbers and tweet ids") {
  const std::string path = temp_path("bad.jsonl");

  write_file(path, "{not json\n");
  CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("line 1"), ParseError);

  std::string bad_sp(kGoodLine);
  bad_sp.replace(bad_sp.find("-0.5"), 4, "1.50");
  write_file(path, bad_sp + "\n");
  CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("t1"), ValidationError);

  std::string overlap(kGoodLine);
  overlap.replace(overlap.find("\"start\": 2"), 10, "\"start\": 0");
  write_file(path, overlap + "\n");
  CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("overlap"), ValidationError);

  std::string cyclic(kGoodLine);
  cyclic.replace(cyclic.find("[1, 1, 1]"), 9, "[1, 0, 1]");
  write_file(path, cyclic + "\n");
  CHECK_THROWS_AS(load_corpus(path), ValidationError);

  std::string bad_rel(kGoodLine);
  bad_rel.replace(bad_rel.find("\"object\": 1"), 11, "\"object\": 9");
  write_file(path, bad_rel + "\n");
  CHECK_THROWS_AS(load_corpus(path), ValidationError);
}

TEST_CASE("unknown keys are ignored") {
  const std::string path = temp_path("extra.jsonl");
  std::string line(kGoodLine);
  line.insert(1, "\"mystery\": 1, ");
  write_file(path, line + "\n");
  Corpus c = load_corpus(path);
  CHECK(c.tweets.size() == 1);
}

TEST_CASE("rt stats come from the train split only") {
  const std::string path = temp_path("stats.jsonl");
  write_file(path, std::string(kGoodLine) + "\n");
  Corpus test_split = load_corpus(path, Split::test);
  CHECK(test_split.rt_min == 0);
  CHECK(test_split.rt_max == 0);
}

TEST_CASE("normalize_retweets") {
  CHECK(normalize_retweets(5, 0, 10) == doctest::Approx(0.5));
  CHECK(normalize_retweets(123, 9, 9) == 0.0);
  CHECK(normalize_retweets(20, 0, 10) == 1.0);
  CHECK(normalize_retweets(-5, 0, 10) == 0.0);
}

TEST_CASE("concern_score values and domain") {
  CHECK(concern_score(-1.0, 1.0, 0.5) == doctest::Approx(1.0));
  CHECK(concern_score(0.0, 0.9, 0.0) == 0.0);
  CHECK(concern_score(-0.5, 0.25, 0.4) == 0.4);  // exact in doubles
  CHECK_THROWS_AS(concern_score(1.5, 0.0, 0.5), DomainError);
  CHECK_THROWS_AS(concern_score(0.0, -0.1, 0.5), DomainError);
  CHECK_THROWS_AS(concern_score(0.0, 0.0, 2.0), DomainError);
}

TEST_CASE("concern_score properties: bounds, boundaries, Lipschitz") {
  Rng rng(314);
  for (int trial = 0; trial < 500; ++trial) {
    const double sp = rng.uniform(-1, 1);
    const double rt = rng.uniform(0, 1);
    const double theta = rng.uniform(0, 1);
    const double cs = concern_score(sp, rt, theta);
    CHECK(cs >= 0.0);
    CHECK(cs <= 1.0);
    CHECK(concern_score(sp, rt, 0.0) == doctest::Approx(std::abs(sp)));
    CHECK(concern_score(sp, rt, 1.0) == doctest::Approx(rt));
    // 1-Lipschitz in each argument; monotone in |sp| and rt.
    const double sp2 = rng.uniform(-1, 1);
    CHECK(std::abs(concern_score(sp2, rt, theta) - cs) <= std::abs(sp2 - sp) + 1e-12);
    const double rt2 = rng.uniform(0, 1);
    CHECK(std::abs(concern_score(sp, rt2, theta) - cs) <= std::abs(rt2 - rt) + 1e-12);
    if (std::abs(sp2) >= std::abs(sp)) {
      CHECK(concern_score(sp2, rt, theta) >= cs - 1e-12);
    }
    if (rt2 >= rt) {
      CHECK(concern_score(sp, rt2, theta) >= cs - 1e-12);
    }
  }
}

TEST_CASE("spans_to_tags definitions") {
  CHECK(spans_to_tags(5, {}) == TagSequence{0, 0, 0, 0, 0});
  TagSequence tags = spans_to_tags(5, {ConcernSpan{2, 4, ConcernType::DIS, std::nullopt}});
  CHECK(tags == TagSequence{kTagOutside, kTagOutside, tag_begin(ConcernType::DIS),
                            tag_inside(ConcernType::DIS), kTagOutside});
  CHECK(tag_name(tag_begin(ConcernType::DIS)) == "B-DIS");
  CHECK_THROWS_AS(spans_to_tags(3, {ConcernSpan{0, 2, ConcernType::FIN, std::nullopt},
                                    ConcernSpan{1, 3, ConcernType::GOV, std::nullopt}}),
                  ValidationError);
}

TEST_CASE("tags_to_spans definitions and repair") {
  CHECK(tags_to_spans({0, 0, 0}).empty());

  TagSequence tags = {tag_begin(ConcernType::FIN), tag_inside(ConcernType::FIN), kTagOutside,
                      tag_begin(ConcernType::GOV)};
  auto spans = tags_to_spans(tags);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == ConcernSpan{0, 2, ConcernType::FIN, std::nullopt});
  CHECK(spans[1] == ConcernSpan{3, 4, ConcernType::GOV, std::nullopt});

  // Stray I-DIS reads as B-DIS.
  auto repaired = tags_to_spans({tag_inside(ConcernType::DIS), kTagOutside});
  REQUIRE(repaired.size() == 1);
  CHECK(repaired[0] == ConcernSpan{0, 1, ConcernType::DIS, std::nullopt});

  // I after a different type starts a new span.
  auto mixed = tags_to_spans({tag_begin(ConcernType::FIN), tag_inside(ConcernType::GOV)});
  REQUIRE(mixed.size() == 2);
  CHECK(mixed[0] == ConcernSpan{0, 1, ConcernType::FIN, std::nullopt});
  CHECK(mixed[1] == ConcernSpan{1, 2, ConcernType::GOV, std::nullopt});
}

TEST_CASE("span/tag round-trip over synthetic corpora") {
  for (const Corpus& corpus :
       {synth::overfit_corpus(), synth::cg_types_corpus(), synth::shared_state_corpus()}) {
    for (const Tweet& t : corpus.tweets) {
      auto spans = tags_to_spans(spans_to_tags(t));
      REQUIRE(spans.size() == t.concerns.size());
      for (std::size_t i = 0; i < spans.size(); ++i) CHECK(spans[i] == t.concerns[i]);
    }
  }
  Rng rng(2718);
  for (int trial = 0; trial < 200; ++trial) {
    Tweet t = synth::random_tweet(rng);
    auto spans = tags_to_spans(spans_to_tags(t));
    REQUIRE(spans.size() == t.concerns.size());
    for (std::size_t i = 0; i < spans.size(); ++i) CHECK(spans[i] == t.concerns[i]);
  }
}

TEST_CASE("synthetic corpora serialize and reload cleanly") {
  for (const Corpus& corpus :
       {synth::overfit_corpus(), synth::cg_types_corpus(), synth::shared_state_corpus()}) {
    const std::string path = temp_path("synth.jsonl");
    save_corpus(corpus, path);
    Corpus reloaded = load_corpus(path);
    CHECK(serialize_corpus(reloaded) == serialize_corpus(corpus));
  }
}

TEST_CASE("length cap") {
  Tweet t;
  t.id = "long";
  for (int i = 0; i < 129; ++i) {
    t.tokens.push_back(Token{"w", i, "N", i == 0 ? 0 : i - 1, "dep"});
  }
  CHECK_THROWS_WITH_AS(validate_tweet(t), doctest::Contains("exceeds cap"), ValidationError);
}
