#include <gtest/gtest.h>

#include <fstream>

#include "mfq/error.hpp"
#include "mfq/record_store.hpp"
#include "test_support.hpp"

using namespace mfq;
using mfq::testing::bundled;
using mfq::testing::TempDir;

namespace {

StoreHeader header(std::string hash = "0123456789abcdef") {
  StoreHeader h;
  h.config_hash = std::move(hash);
  h.config = {{"samples_per_cell", 2}};
  h.questionnaire = read_text_file(bundled_questionnaire_path());
  return h;
}

CompletionExchange exchange(std::string raw, int attempt = 1) {
  CompletionExchange e;
  e.system_text = "sys";
  e.user_text = "user \"quoted\"\nline";
  e.raw_response = std::move(raw);
  e.latency = std::chrono::microseconds(1234);
  e.attempt = attempt;
  e.endpoint_name = "ep";
  e.timestamp = "2024-01-01T00:00:00.000Z";
  e.seed = 77;
  return e;
}

// One full sample: every item answered `score`, except `missing` which failed.
std::pair<std::vector<AnswerRecord>, SampleCommit> sample(const Cell& cell, int index, int score,
                                                          std::vector<std::string> missing = {}) {
  std::vector<AnswerRecord> records;
  for (const auto& item : bundled().items()) {
    AnswerRecord r;
    r.cell = cell;
    r.sample_index = index;
    r.item_id = item.id;
    if (std::find(missing.begin(), missing.end(), item.id) != missing.end()) {
      r.exchanges = {exchange("no idea"), exchange("still no idea")};
      r.failure = AnswerFailure{FailureKind::Unparseable, {}, {}};
      r.reasks_used = 1;
    } else {
      r.exchanges = {exchange("[" + std::to_string(score) + "]")};
      r.parsed = ParsedAnswer{score, ParseStrategy::BracketDigit, "[" + std::to_string(score) + "]", 0};
    }
    records.push_back(std::move(r));
  }
  return {records, SampleCommit{cell, index, missing}};
}

void append(StoreWriter& w, const std::pair<std::vector<AnswerRecord>, SampleCommit>& s) { w.append_sample(s.first, s.second); }

std::string slurp(const std::filesystem::path& p) { return read_text_file(p); }

}  // namespace

TEST(Json, AnswerRoundTrip) {
  AnswerRecord r;
  r.cell = {"mixtral:8x7b", "liberal"};
  r.sample_index = 3;
  r.item_id = "Agreement#9";
  auto failed = exchange("");
  failed.error = "http 503";
  r.exchanges = {failed, exchange("[4] moderately agree", 2)};
  r.parsed = ParsedAnswer{4, ParseStrategy::BracketDigit, "[4]", 0};
  const auto j = to_json(r);
  EXPECT_EQ(j["type"], "answer");
  EXPECT_EQ(j["exchanges"][0]["error"], "http 503");
  EXPECT_DOUBLE_EQ(j["exchanges"][1]["latency_ms"].get<double>(), 1.234);
  const auto back = answer_from_json(j);
  EXPECT_EQ(back.cell, r.cell);
  EXPECT_EQ(back.item_id, r.item_id);
  ASSERT_EQ(back.exchanges.size(), 2u);
  EXPECT_EQ(back.exchanges[0].error, "http 503");
  EXPECT_EQ(back.exchanges[1].raw_response, "[4] moderately agree");
  EXPECT_EQ(back.exchanges[1].user_text, r.exchanges[1].user_text);
  EXPECT_EQ(back.exchanges[1].seed, 77u);
  EXPECT_EQ(back.exchanges[1].attempt, 2);
  ASSERT_TRUE(back.parsed.has_value());
  EXPECT_EQ(back.parsed->score, 4);
  EXPECT_EQ(back.parsed->matched_span, "[4]");
  EXPECT_EQ(to_json(back), j);
}

TEST(Json, FailureRoundTrip) {
  AnswerRecord r;
  r.cell = {"m", "none"};
  r.item_id = "Relevance#1";
  r.failure = AnswerFailure{FailureKind::Ambiguous, {2, 3}, {}};
  r.reasks_used = 1;
  const auto back = answer_from_json(to_json(r));
  ASSERT_TRUE(back.failure.has_value());
  EXPECT_EQ(back.failure->kind, FailureKind::Ambiguous);
  EXPECT_EQ(back.failure->candidates, (std::vector<int>{2, 3}));
  EXPECT_EQ(back.reasks_used, 1);
  EXPECT_FALSE(back.parsed.has_value());
}

TEST(Writer, CreatesHeaderAndCommits) {
  TempDir dir;
  const auto path = dir / "nested/dir/store.jsonl";
  {
    StoreWriter w(path, header());
    append(w, sample({"m", "none"}, 0, 2));
    append(w, sample({"m", "none"}, 1, 3, {"Agreement#3"}));
  }
  const auto c = read_store(path);
  ASSERT_TRUE(c.header.has_value());
  EXPECT_EQ(c.header->config_hash, "0123456789abcdef");
  EXPECT_TRUE(c.warnings.empty());
  EXPECT_EQ(c.answers.size(), 64u);
  ASSERT_EQ(c.commits.size(), 2u);
  EXPECT_EQ(c.commits[1].missing, (std::vector<std::string>{"Agreement#3"}));
  EXPECT_EQ(c.committed_bytes, std::filesystem::file_size(path));

  const auto pops = build_populations(c);
  ASSERT_EQ(pops.size(), 1u);
  ASSERT_EQ(pops[0].samples.size(), 2u);
  EXPECT_TRUE(pops[0].samples[0].complete());
  EXPECT_FALSE(pops[0].samples[1].complete());
  EXPECT_EQ(pops[0].samples[1].answers.size(), 31u);
  EXPECT_EQ(pops[0].samples[0].answers.at("Agreement#9"), 2);
  EXPECT_EQ(store_questionnaire(c).items().size(), 32u);
}

TEST(Writer, ReopenAppendsAndReportsExisting) {
  TempDir dir;
  const auto path = dir / "s.jsonl";
  { StoreWriter w(path, header()); append(w, sample({"m", "none"}, 0, 1)); }
  StoreWriter w(path, header());
  ASSERT_EQ(w.existing().size(), 1u);
  append(w, sample({"m", "none"}, 1, 1));
  EXPECT_EQ(read_store(path).commits.size(), 2u);
}

TEST(Writer, HashMismatchIsConfigError) {
  TempDir dir;
  const auto path = dir / "s.jsonl";
  { StoreWriter w(path, header("aaaaaaaaaaaaaaaa")); }
  EXPECT_THROW(StoreWriter(path, header("bbbbbbbbbbbbbbbb")), ConfigError);
}

TEST(Writer, NotAStoreIsIoError) {
  TempDir dir;
  const auto path = dir / "s.jsonl";
  std::ofstream(path) << "hello world\n";
  EXPECT_THROW(StoreWriter(path, header()), IoError);
}

TEST(Recovery, UncommittedTailIsDropped) {
  TempDir dir;
  const auto path = dir / "s.jsonl";
  { StoreWriter w(path, header()); append(w, sample({"m", "none"}, 0, 1)); }
  const auto committed = slurp(path);
  {
    // Half a sample: a few answer lines and a torn one, no commit.
    const auto s = sample({"m", "none"}, 1, 4);
    std::ofstream out(path, std::ios::app | std::ios::binary);
    for (int i = 0; i < 5; ++i) out << to_json(s.first[static_cast<std::size_t>(i)]).dump() << '\n';
    out << R"({"type":"answer","endpoint":"m","pers)";
  }
  const auto c = read_store(path);
  EXPECT_EQ(c.commits.size(), 1u);
  EXPECT_EQ(c.answers.size(), 32u);
  EXPECT_EQ(c.warnings.size(), 2u);  // torn line + uncommitted records
  {
    StoreWriter w(path, header());
    EXPECT_EQ(w.existing().size(), 1u);
    EXPECT_FALSE(w.warnings().empty());
    EXPECT_EQ(slurp(path), committed);
    append(w, sample({"m", "none"}, 1, 4));
  }
  const auto after = read_store(path);
  EXPECT_TRUE(after.warnings.empty());
  EXPECT_EQ(after.commits.size(), 2u);
  EXPECT_EQ(after.answers.size(), 64u);
}

TEST(Recovery, CorruptMiddleLineIsSkippedWithWarning) {
  TempDir dir;
  const auto path = dir / "s.jsonl";
  { StoreWriter w(path, header()); append(w, sample({"m", "none"}, 0, 1)); }
  std::string text = slurp(path);
  const auto second_line = text.find('\n') + 1;
  text.insert(second_line, "{not json\n");
  std::ofstream(path, std::ios::trunc | std::ios::binary) << text;
  const auto c = read_store(path);
  EXPECT_EQ(c.answers.size(), 32u);
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_NE(c.warnings[0].find("line 2: corrupt record skipped"), std::string::npos);
}

TEST(Populations, EmptyStore) {
  TempDir dir;
  const auto path = dir / "empty.jsonl";
  std::ofstream(path).close();
  EXPECT_TRUE(load_populations(path).empty());
  { StoreWriter w(path, header()); }
  EXPECT_TRUE(load_populations(path).empty());
}

TEST(Populations, OrderOfFirstAppearanceAndSortedSamples) {
  TempDir dir;
  const auto path = dir / "s.jsonl";
  {
    StoreWriter w(path, header());
    append(w, sample({"b", "none"}, 1, 1));
    append(w, sample({"a", "liberal"}, 0, 2));
    append(w, sample({"b", "none"}, 0, 3));
  }
  const auto pops = load_populations(path);
  ASSERT_EQ(pops.size(), 2u);
  EXPECT_EQ(pops[0].cell, (Cell{"b", "none"}));
  EXPECT_EQ(pops[0].samples[0].sample_index, 0);
  EXPECT_EQ(pops[0].samples[0].answers.at("Relevance#0"), 3);
  EXPECT_EQ(pops[1].cell, (Cell{"a", "liberal"}));
}

TEST(Reader, MissingFileIsIoError) { EXPECT_THROW(read_store("/nonexistent/x.jsonl"), IoError); }
