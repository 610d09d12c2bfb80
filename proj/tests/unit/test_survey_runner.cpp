#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "mfq/error.hpp"
#include "mfq/response_parsing.hpp"
#include "mfq/survey_runner.hpp"
#include "test_support.hpp"

using namespace mfq;
using mfq::testing::bundled;
using mfq::testing::TempDir;

namespace {

SampleContext ctx(int reask_limit = 1, std::optional<std::uint64_t> seed = {}) {
  return SampleContext{{"stub", "none"}, 0, reask_limit, seed, {}};
}

ExperimentConfig stub_config(const std::filesystem::path& out, int endpoints, int samples,
                             std::vector<std::string> scripts = {"random"}) {
  ExperimentConfig cfg;
  for (int e = 0; e < endpoints; ++e) {
    EndpointConfig ec;
    ec.endpoint.name = "stub-" + std::string(1, static_cast<char>('a' + e));
    ec.endpoint.model_id = ec.endpoint.name;
    ec.endpoint.limits.backoff.clear();
    ec.endpoint.limits.max_concurrent = 4;
    ec.stub = StubScript{scripts[static_cast<std::size_t>(e) % scripts.size()], 0, 1, 0};
    cfg.endpoints.push_back(ec);
  }
  cfg.personas = {{"none", {}, {}},
                  {"liberal", Ideology::Liberal, {}},
                  {"moderate", Ideology::Moderate, {}},
                  {"conservative", Ideology::Conservative, {}}};
  cfg.samples_per_cell = samples;
  cfg.questionnaire_path = bundled_questionnaire_path();
  cfg.output_path = out;
  cfg.seed = 17;
  return cfg;
}

std::string without_volatile(const std::filesystem::path& p) {
  std::istringstream in(read_text_file(p));
  std::string out, line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    if (j.contains("exchanges"))
      for (auto& e : j["exchanges"]) {
        e.erase("timestamp");
        e.erase("latency_ms");
      }
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace

TEST(Sample, AlwaysTwoIsComplete) {
  auto stub = make_stub_endpoint([](const StubRequest&) { return StubReply::text("[2]"); });
  ChatClient client(stub.endpoint);
  const auto r = run_survey_sample(client, {"none", {}, {}}, bundled(), ctx());
  EXPECT_TRUE(r.sample.complete());
  EXPECT_EQ(r.sample.answers.size(), 32u);
  for (const auto& [id, score] : r.sample.answers) EXPECT_EQ(score, 2) << id;
  ASSERT_EQ(r.records.size(), 32u);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(r.records[i].item_id, bundled().items()[i].id);
  EXPECT_FALSE(r.client_failure);
}

TEST(Sample, ReaskOnceThenParse) {
  auto stub = make_stub_endpoint(
      [](const StubRequest& r) { return r.prompt_call_index == 0 ? StubReply::text("hmm") : StubReply::text("[1]"); });
  ChatClient client(stub.endpoint);
  const auto r = run_survey_sample(client, {"none", {}, {}}, bundled(), ctx(1));
  EXPECT_TRUE(r.sample.complete());
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.reasks_used, 1);
    ASSERT_EQ(rec.exchanges.size(), 2u);
    EXPECT_EQ(rec.exchanges[0].raw_response, "hmm");
    EXPECT_EQ(rec.parsed->score, 1);
  }
}

TEST(Sample, NeverParseableIsPartial) {
  auto stub = make_stub_endpoint([](const StubRequest&) { return StubReply::text("As an AI I cannot have opinions."); });
  ChatClient client(stub.endpoint);
  const auto r = run_survey_sample(client, {"none", {}, {}}, bundled(), ctx(2));
  EXPECT_FALSE(r.sample.complete());
  EXPECT_EQ(r.sample.missing.size(), 32u);
  std::size_t exchanges = 0;
  for (const auto& rec : r.records) {
    exchanges += rec.exchanges.size();
    ASSERT_TRUE(rec.failure.has_value());
    EXPECT_EQ(rec.failure->kind, FailureKind::Unparseable);
    EXPECT_EQ(rec.reasks_used, 2);
  }
  EXPECT_EQ(exchanges, 96u);
  EXPECT_EQ(stub.server->calls(), 96u);
}

TEST(Sample, AmbiguousIsRecorded) {
  auto stub = make_stub_endpoint([](const StubRequest&) { return StubReply::text("slightly agree or strongly agree"); });
  ChatClient client(stub.endpoint);
  const auto r = run_survey_sample(client, {"none", {}, {}}, bundled(), ctx(0));
  const auto& rec = r.records[16];  // Agreement#0
  ASSERT_TRUE(rec.failure.has_value());
  EXPECT_EQ(rec.failure->kind, FailureKind::Ambiguous);
  EXPECT_EQ(rec.failure->candidates, (std::vector<int>{3, 5}));
  EXPECT_EQ(r.records[0].failure->kind, FailureKind::Unparseable);  // relevance scale has no such labels
}

TEST(Sample, ClientErrorSkipsRest) {
  auto stub = make_stub_endpoint([](const StubRequest& r) {
    return r.call_index >= 3 ? StubReply::http_error(401) : StubReply::text("[3]");
  }, "stub", 1);
  ChatClient client(stub.endpoint);
  const auto r = run_survey_sample(client, {"none", {}, {}}, bundled(), ctx());
  EXPECT_TRUE(r.client_failure);
  EXPECT_EQ(r.sample.answers.size(), 3u);
  EXPECT_EQ(r.records[3].failure->kind, FailureKind::ClientError);
  EXPECT_EQ(r.records[4].failure->kind, FailureKind::Skipped);
  EXPECT_TRUE(r.records[4].exchanges.empty());
  EXPECT_EQ(stub.server->calls(), 4u);
}

TEST(Sample, ConcurrencyBoundedBySemaphore) {
  auto stub = make_stub_endpoint([](const StubRequest&) {
    StubReply r = StubReply::text("[0]");
    r.delay = std::chrono::milliseconds(5);
    return r;
  }, "stub", 3);
  ChatClient client(stub.endpoint);
  run_survey_sample(client, {"none", {}, {}}, bundled(), ctx());
  EXPECT_LE(stub.server->max_in_flight(), 3);
}

TEST(Sample, SeedsAreDeterministic) {
  std::mutex m;
  std::map<std::string, std::uint64_t> seeds;
  auto stub = make_stub_endpoint([&](const StubRequest& r) {
    std::lock_guard lock(m);
    seeds[r.user_text] = r.seed.value_or(0);
    return StubReply::text("[0]");
  });
  ChatClient client(stub.endpoint);
  run_survey_sample(client, {"none", {}, {}}, bundled(), ctx(1, 5));
  const auto& item = bundled().items()[7];
  const auto prompt = render_question_prompt(item, bundled().scale(item.part));
  EXPECT_EQ(seeds.at(prompt), request_seed(5, {"stub", "none"}, 0, item.id, 0));
  EXPECT_NE(request_seed(5, {"stub", "none"}, 0, item.id, 0), request_seed(5, {"stub", "none"}, 1, item.id, 0));
  EXPECT_NE(request_seed(5, {"stub", "none"}, 0, item.id, 0), request_seed(5, {"stub", "none"}, 0, item.id, 1));
  EXPECT_LT(request_seed(5, {"a", "b"}, 3, "x", 0), 1ULL << 63);
}

TEST(Experiment, OneStubOnePersonaOneSample) {
  TempDir dir;
  auto cfg = stub_config(dir / "s.jsonl", 1, 1);
  cfg.personas.resize(1);
  StubFleet fleet(cfg);
  const auto s = run_experiment(cfg);
  EXPECT_EQ(s.surveys, 1u);
  EXPECT_EQ(s.answer_records, 32u);
  EXPECT_EQ(read_store(dir / "s.jsonl").answers.size(), 32u);
}

TEST(Experiment, TwoStubsFourPersonasFifty) {
  TempDir dir;
  auto cfg = stub_config(dir / "s.jsonl", 2, 50, {"persona", "attentive"});
  StubFleet fleet(cfg);
  const auto s = run_experiment(cfg);
  EXPECT_EQ(s.surveys, 400u);
  EXPECT_EQ(s.complete_surveys, 400u);
  EXPECT_EQ(s.answer_records, 12800u);
  const auto pops = load_populations(dir / "s.jsonl");
  ASSERT_EQ(pops.size(), 8u);
  for (const auto& p : pops) EXPECT_EQ(p.samples.size(), 50u);
  // The persona script centres liberal at 1 and conservative at 4.
  auto mean_of = [&](const Population& p) {
    double sum = 0;
    for (const auto& smp : p.samples) sum += smp.answers.at("Agreement#0");
    return sum / static_cast<double>(p.samples.size());
  };
  EXPECT_LT(mean_of(pops[1]), mean_of(pops[3]));
}

TEST(Experiment, RecordConservation) {
  TempDir dir;
  auto cfg = stub_config(dir / "s.jsonl", 1, 3);
  cfg.endpoints[0].stub = StubScript{"random", 0, 1, 0};
  StubFleet fleet(cfg);
  const auto s = run_experiment(cfg);
  const auto c = read_store(dir / "s.jsonl");
  std::size_t stored_exchanges = 0;
  for (const auto& r : c.answers) {
    stored_exchanges += r.exchanges.size();
    ASSERT_TRUE(r.parsed.has_value());
    const auto& item = bundled().at(r.item_id);
    const auto again = parse_likert(r.exchanges.back().raw_response, bundled().scale(item.part));
    ASSERT_TRUE(parsed(again));
    EXPECT_EQ(std::get<ParsedAnswer>(again).score, r.parsed->score);
  }
  EXPECT_EQ(stored_exchanges, s.exchanges);
  EXPECT_EQ(stored_exchanges, fleet.servers()[0]->calls());
}

TEST(Experiment, RerunIsIdempotent) {
  TempDir dir;
  auto cfg = stub_config(dir / "s.jsonl", 1, 5);
  StubFleet fleet(cfg);
  run_experiment(cfg);
  const auto first = read_text_file(dir / "s.jsonl");
  const auto again = run_experiment(cfg);
  EXPECT_EQ(again.answer_records, 0u);
  EXPECT_EQ(again.surveys, 20u);
  EXPECT_EQ(read_text_file(dir / "s.jsonl"), first);
}

TEST(Experiment, StopAndResumeMatchesUninterrupted) {
  TempDir dir;
  auto full_cfg = stub_config(dir / "full.jsonl", 2, 4);
  {
    StubFleet fleet(full_cfg);
    run_experiment(full_cfg);
  }
  auto cfg = stub_config(dir / "resumed.jsonl", 2, 4);
  StubFleet fleet(cfg);
  int budget = 9;
  RunOptions stop_early;
  stop_early.stop_requested = [&] { return budget-- <= 0; };
  const auto partial = run_experiment(cfg, stop_early);
  EXPECT_TRUE(partial.stopped);
  EXPECT_EQ(partial.surveys, 9u);
  const auto rest = run_experiment(cfg);
  EXPECT_FALSE(rest.stopped);
  EXPECT_EQ(rest.surveys, 32u);
  EXPECT_EQ(without_volatile(dir / "resumed.jsonl"), without_volatile(dir / "full.jsonl"));
}

TEST(Experiment, ExtendingSamplesKeepsStore) {
  TempDir dir;
  auto cfg = stub_config(dir / "s.jsonl", 1, 2);
  StubFleet fleet(cfg);
  run_experiment(cfg);
  cfg.samples_per_cell = 3;
  const auto s = run_experiment(cfg);
  EXPECT_EQ(s.answer_records, 4u * 32u);
  EXPECT_EQ(s.surveys, 12u);
}

TEST(Experiment, ChangedConfigRefusesStore) {
  TempDir dir;
  auto cfg = stub_config(dir / "s.jsonl", 1, 1);
  StubFleet fleet(cfg);
  run_experiment(cfg);
  cfg.reask_limit = 3;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST(Experiment, NeedsBaseUrl) {
  TempDir dir;
  auto cfg = stub_config(dir / "s.jsonl", 1, 1);
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  EXPECT_FALSE(std::filesystem::exists(dir / "s.jsonl"));
}

TEST(Status, CountsPerCell) {
  TempDir dir;
  auto cfg = stub_config(dir / "s.jsonl", 1, 3);
  StubFleet fleet(cfg);
  int budget = 6;
  RunOptions o;
  o.stop_requested = [&] { return budget-- <= 0; };
  run_experiment(cfg, o);
  const auto st = store_status(dir / "s.jsonl");
  ASSERT_EQ(st.cells.size(), 4u);
  EXPECT_EQ(st.cells[0].complete, 3);
  EXPECT_EQ(st.cells[1].complete, 3);
  EXPECT_EQ(st.cells[2].complete, 0);
  EXPECT_EQ(st.cells[2].expected, 3);
  EXPECT_EQ(st.surveys, 6u);
  EXPECT_EQ(st.answer_records, 6u * 32u);
}
