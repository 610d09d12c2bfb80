// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion; exits non-zero
// when a gating criterion fails. Usage: acceptance <path-to-mfq-binary>
#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mfq/analysis.hpp"
#include "mfq/record_store.hpp"
#include "mfq/reporting.hpp"
#include "mfq/response_parsing.hpp"
#include "mfq/value_statements.hpp"
#include "test_support.hpp"

extern char** environ;

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mfq;
using mfq::testing::bundled;
using mfq::testing::TempDir;

namespace {

std::string g_cli;

struct Outcome {
  enum Status { Pass, Fail, Skip } status;
  std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Fail, std::move(d)}; }

fs::path data_dir() { return fs::path(MFQ_DATA_DIR); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Starts the CLI with stdout/stderr redirected to files; returns the pid.
pid_t spawn_cli(const std::vector<std::string>& args, const fs::path& out, const fs::path& err) {
  std::vector<std::string> full{g_cli};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : full) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&fa, 2, err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  pid_t pid = -1;
  if (posix_spawn(&pid, g_cli.c_str(), &fa, nullptr, argv.data(), environ) != 0) pid = -1;
  posix_spawn_file_actions_destroy(&fa);
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  if (waitpid(pid, &status, 0) < 0) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args, const fs::path& scratch) {
  const auto o = scratch / "cli.out", e = scratch / "cli.err";
  const pid_t pid = spawn_cli(args, o, e);
  if (pid < 0) return {-1, "", "spawn failed"};
  const int code = wait_exit(pid);
  return {code, slurp(o), slurp(e)};
}

std::vector<json> store_lines(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

// Hard-coded scoring key, independent of the library: foundation index 0..4, 5 = catch.
int key_of(int index) {
  static const int key[16] = {0, 1, 2, 3, 4, 5, 0, 1, 2, 3, 4, 0, 1, 2, 3, 4};
  return key[index];
}

// Item id -> (part 0/1, index)
std::pair<int, int> split_id(const std::string& id) {
  const auto hash = id.find('#');
  return {id.substr(0, hash) == "Agreement" ? 1 : 0, std::stoi(id.substr(hash + 1))};
}

// ---------------------------------------------------------------------------

Outcome criterion1(const fs::path& work, fs::path* store_out) {
  write(work / "exp.yaml", slurp(data_dir() / "examples" / "stub_experiment.yaml"));
  const auto store = work / "stub_store.jsonl";
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_cli({"survey", "run", "--config", (work / "exp.yaml").string()}, work);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.code != 0) return fail("survey run exited " + std::to_string(r.code) + ": " + r.err);
  *store_out = store;
  std::size_t complete = 0, answers = 0, commits = 0;
  for (const auto& j : store_lines(store)) {
    const auto type = j.at("type").get<std::string>();
    if (type == "sample") {
      ++commits;
      complete += j.at("complete").get<bool>() ? 1 : 0;
    } else if (type == "answer") {
      ++answers;
    }
  }
  std::ostringstream d;
  d << complete << " complete surveys of " << commits << ", " << answers << " answer records, " << secs << " s";
  if (complete == 1400 && commits == 1400 && answers == 44800 && secs < 300.0) return pass(d.str());
  return fail(d.str());
}

// ---------------------------------------------------------------------------

using NaiveKey = std::tuple<std::string, std::string, bool>;

std::map<NaiveKey, double> naive_variance(const fs::path& store, Grouping g) {
  std::map<std::pair<std::string, std::string>, bool> complete;  // "endpoint\npersona\nsample" -> complete
  std::vector<json> lines = store_lines(store);
  for (const auto& j : lines)
    if (j["type"] == "sample")
      complete[{j["endpoint"].get<std::string>() + "\n" + j["persona"].get<std::string>(),
                std::to_string(j["sample"].get<int>())}] = j["complete"].get<bool>();
  // (endpoint, persona, item) -> scores
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> scores;
  for (const auto& j : lines) {
    if (j["type"] != "answer") continue;
    const std::string ep = j["endpoint"], ps = j["persona"];
    const auto it = complete.find({ep + "\n" + ps, std::to_string(j["sample"].get<int>())});
    if (it == complete.end() || !it->second || !j.contains("parsed")) continue;
    scores[{ep, ps, j["item"].get<std::string>()}].push_back(j["parsed"]["score"].get<int>());
  }
  static const char* names[] = {"harm", "fairness", "loyalty", "authority", "purity", "catch"};
  std::map<NaiveKey, std::pair<double, int>> acc;
  for (const auto& [k, xs] : scores) {
    const auto& [ep, ps, item] = k;
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    const auto [part, index] = split_id(item);
    (void)part;
    const int f = key_of(index);
    std::string row, col;
    switch (g) {
      case Grouping::Model: row = ep; break;
      case Grouping::Persona: row = ps; break;
      case Grouping::ModelPersona: row = ep; col = ps; break;
      case Grouping::FoundationPersona: row = names[f]; col = ps; break;
      case Grouping::QuestionModel: row = item; col = ep; break;
      case Grouping::QuestionPersona: row = item; col = ps; break;
    }
    auto& a = acc[{row, col, f == 5}];
    a.first += var;
    a.second += 1;
  }
  std::map<NaiveKey, double> out;
  for (const auto& [k, a] : acc) out[k] = a.first / a.second;
  return out;
}

StoreHeader fixture_header() {
  StoreHeader h;
  h.config_hash = "fixture";
  h.config = json::object();
  h.questionnaire = read_text_file(bundled_questionnaire_path());
  return h;
}

AnswerRecord answer(const Cell& c, int sample, const std::string& item, std::optional<int> score) {
  AnswerRecord r;
  r.cell = c;
  r.sample_index = sample;
  r.item_id = item;
  if (score) {
    ParsedAnswer p;
    p.score = *score;
    p.matched_span = "[" + std::to_string(*score) + "]";
    r.parsed = p;
  } else {
    r.failure = AnswerFailure{FailureKind::Unparseable, {}, ""};
  }
  return r;
}

Outcome criterion2(const fs::path& work) {
  std::mt19937_64 rng(0xC0FFEE);
  const auto& q = bundled();
  double worst = 0.0;
  std::size_t compared = 0;
  for (int s = 0; s < 100; ++s) {
    const auto path = work / ("random_" + std::to_string(s) + ".jsonl");
    {
      StoreWriter w(path, fixture_header());
      const int models = 1 + static_cast<int>(rng() % 5), personas = 1 + static_cast<int>(rng() % 5);
      for (int m = 0; m < models; ++m)
        for (int p = 0; p < personas; ++p) {
          if (rng() % 7 == 0) continue;  // ragged grids
          const Cell c{"model-" + std::to_string(m), "persona-" + std::to_string(p)};
          const int n = 1 + static_cast<int>(rng() % 15);
          for (int i = 0; i < n; ++i) {
            std::vector<AnswerRecord> recs;
            SampleCommit commit{c, i, {}};
            for (const auto& item : q.items()) {
              std::optional<int> score = static_cast<int>(rng() % 6);
              if (rng() % 200 == 0) score.reset();
              if (!score) commit.missing.push_back(item.id);
              recs.push_back(answer(c, i, item.id, score));
            }
            w.append_sample(recs, commit);
          }
        }
    }
    const auto pops = load_populations(path);
    for (auto g : {Grouping::Model, Grouping::Persona, Grouping::ModelPersona, Grouping::FoundationPersona,
                   Grouping::QuestionModel, Grouping::QuestionPersona}) {
      const auto expected = naive_variance(path, g);
      const auto t = aggregate_variance(pops, g, q);
      if (t.scored.size() + t.catch_items.size() != expected.size())
        return fail("store " + std::to_string(s) + " grouping " + std::string(to_string(g)) + ": group count differs");
      for (const auto* cells : {&t.scored, &t.catch_items})
        for (const auto& c : *cells) {
          const auto it = expected.find({c.row, c.column, cells == &t.catch_items});
          if (it == expected.end()) return fail("unexpected group " + c.row + "/" + c.column);
          worst = std::max(worst, std::abs(it->second - c.value));
          ++compared;
        }
    }
    fs::remove(path);
  }
  std::ostringstream d;
  d << "100 stores, " << compared << " group values, max |diff| " << worst;
  return worst <= 1e-9 ? pass(d.str()) : fail(d.str());
}

// ---------------------------------------------------------------------------

Outcome criterion3() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  auto vec = [&] {
    FoundationScores v{};
    for (auto& x : v) x = rng() % 5 == 0 ? static_cast<double>(rng() % 6) : u(rng);
    return v;
  };
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto a = vec(), b = vec(), c = vec();
    const double ab = cross_distance(a, b), ba = cross_distance(b, a), bc = cross_distance(b, c),
                 ac = cross_distance(a, c);
    if (cross_distance(a, a) != 0.0) return fail("identity: d(a,a) != 0");
    if ((ab == 0.0) != (a == b)) return fail("identity of indiscernibles violated");
    if (ab != ba) return fail("symmetry violated");
    if (ac > ab + bc + 1e-12) return fail("triangle inequality violated");
    for (double d : {ab, bc, ac})
      if (d < 0.0 || d > 25.0) return fail("distance outside [0,25]");
  }
  if (cross_distance({0, 0, 0, 0, 0}, {5, 5, 5, 5, 5}) != 25.0) return fail("extreme pair is not 25");
  return pass(std::to_string(n) + " random triples; identity, symmetry, triangle, range [0,25]");
}

// ---------------------------------------------------------------------------

Outcome criterion4() {
  const auto& q = bundled();
  std::map<std::string, int> counts;
  for (const auto& item : q.items()) counts[to_string(foundation_of(item))]++;
  const std::map<std::string, int> expected = {{"harm", 6},      {"fairness", 6}, {"loyalty", 6},
                                               {"authority", 6}, {"purity", 6},   {"catch", 2}};
  if (counts != expected) return fail("foundation counts differ from 6/6/6/6/6/2");
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = mfq::testing::random_sample({"m", "p"}, i, q, rng);
    const auto lib = sample_foundation_scores(s, q);
    std::array<double, 5> sum{};
    std::array<int, 5> n{};
    for (const auto& [id, v] : s.answers) {
      const int f = key_of(split_id(id).second);
      if (f == 5) continue;
      sum[static_cast<std::size_t>(f)] += v;
      n[static_cast<std::size_t>(f)]++;
    }
    for (std::size_t f = 0; f < 5; ++f) {
      if (n[f] != 6) return fail("brute force found " + std::to_string(n[f]) + " items for a foundation");
      worst = std::max(worst, std::abs(lib[f] - sum[f] / 6.0));
      if (lib[f] < 0.0 || lib[f] > 5.0) return fail("score outside [0,5]");
    }
  }
  std::ostringstream d;
  d << "counts 6/6/6/6/6 + 2 catch; 1000 samples, max |diff| " << worst;
  return worst <= 1e-12 ? pass(d.str()) : fail(d.str());
}

// ---------------------------------------------------------------------------

Outcome criterion5(const fs::path& store) {
  if (store.empty()) return fail("no store from criterion 1");
  std::vector<std::string> warnings;
  const auto contents = read_store(store);
  const auto q = store_questionnaire(contents);
  const auto pops = build_populations(contents);
  std::size_t flagged5 = 0, n5 = 0, valid_att = 0, n_att = 0;
  for (const auto& p : pops) {
    for (const auto& s : p.samples) {
      if (!s.complete()) return fail("partial sample in " + p.cell.label());
      const bool valid = catch_validity(s, q).valid;
      if (p.cell.endpoint == "stub-f") {
        ++n5;
        flagged5 += valid ? 0 : 1;
      } else if (p.cell.endpoint == "stub-e") {
        ++n_att;
        valid_att += valid ? 1 : 0;
      }
    }
  }
  std::ostringstream d;
  d << "constant-5 stub: " << flagged5 << "/" << n5 << " flagged; attentive stub: " << valid_att << "/" << n_att
    << " valid";
  if (n5 == 200 && flagged5 == n5 && n_att == 200 && valid_att == n_att) return pass(d.str());
  return fail(d.str());
}

// ---------------------------------------------------------------------------

Outcome criterion6() {
  const auto& q = bundled();
  const auto& agr = q.scale(Part::Agreement);
  const auto& rel = q.scale(Part::Relevance);
  auto score_of = [](const ParseResult& r) { return parsed(r) ? std::get<ParsedAnswer>(r).score : -1; };
  const auto a = parse_likert("[4] moderately agree", agr);
  if (score_of(a) != 4 || std::get<ParsedAnswer>(a).strategy != ParseStrategy::BracketDigit)
    return fail("example 1");
  const auto b = parse_likert("I would say strongly disagree.", agr);
  if (score_of(b) != 0 || std::get<ParsedAnswer>(b).strategy != ParseStrategy::LabelPhrase) return fail("example 2");
  if (!std::holds_alternative<Unparseable>(parse_likert("As an AI I cannot have opinions.", agr)))
    return fail("example 3");
  const auto c = parse_likert("slightly relevant, maybe somewhat relevant", rel);
  if (!std::holds_alternative<Ambiguous>(c) || std::get<Ambiguous>(c).candidates != std::vector<int>{2, 3})
    return fail("example 4");

  std::mt19937_64 rng(123456789);
  const std::size_t fuzz = 1000000;
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < fuzz; ++i) {
    std::string s(rng() % 48, '\0');
    for (auto& ch : s) ch = static_cast<char>(rng() & 0xFF);
    const auto r = parse_likert(s, i % 2 ? agr : rel);
    if (parsed(r) && (std::get<ParsedAnswer>(r).score < 0 || std::get<ParsedAnswer>(r).score > 5))
      return fail("fuzz produced out-of-range score");
    counts[r.index()]++;
  }

  std::size_t adversarial = 0;
  for (int i = 0; i < 20000; ++i) {
    const int d = static_cast<int>(rng() % 6);
    std::string noise;
    const int parts = static_cast<int>(rng() % 4);
    for (int k = 0; k < parts; ++k) noise += agr.labels[rng() % 6] + " " + std::to_string(rng() % 10) + " ";
    std::string text = noise + "[" + std::to_string(d) + "] " + agr.labels[rng() % 6] + " " + std::to_string(rng() % 6);
    // Bracketed digits outside 0..5 never win.
    if (rng() % 2) text = "[" + std::to_string(6 + rng() % 4) + "] " + text;
    const auto r = parse_likert(text, agr);
    if (score_of(r) != d || std::get<ParsedAnswer>(r).strategy != ParseStrategy::BracketDigit)
      return fail("bracket priority lost on: " + text);
    ++adversarial;
  }
  std::ostringstream d;
  d << "4 examples; " << fuzz << " fuzz strings (" << counts[0] << " scored, " << counts[1] << " unparseable, "
    << counts[2] << " ambiguous); " << adversarial << " adversarial replies";
  return pass(d.str());
}

// ---------------------------------------------------------------------------

// Item variances reachable with 50 scores drawn from {0,1,2}, each with one realizing
// multiset of counts.
struct Realization {
  double variance;
  int n0, n1, n2;
};

std::vector<Realization> reachable(int n) {
  std::map<double, Realization> by_value;
  for (int n1 = 0; n1 <= n; ++n1)
    for (int n2 = 0; n1 + n2 <= n; ++n2) {
      const double mean = (n1 + 2.0 * n2) / n;
      const double var = (n1 + 4.0 * n2) / n - mean * mean;
      by_value.emplace(var, Realization{var, n - n1 - n2, n1, n2});
    }
  std::vector<Realization> out;
  for (const auto& [v, r] : by_value) out.push_back(r);
  return out;
}

Outcome criterion7(const fs::path& work) {
  const std::vector<std::pair<std::string, double>> models = {
      {"mistral:8x7b", 0.030}, {"gemma:7b", 0.081},   {"llama3:70b", 0.141}, {"mixtral:8x22b", 0.147},
      {"mistral:7b", 0.404},   {"llama2:70b", 0.423}, {"qwen:72b", 0.425}};
  const std::vector<std::pair<std::string, double>> personas = {
      {"none", 0.150}, {"liberal", 0.184}, {"conservative", 0.237}, {"moderate", 0.372}};
  double pbar = 0;
  for (const auto& p : personas) pbar += p.second;
  pbar /= static_cast<double>(personas.size());

  const int n = 50;
  const auto options = reachable(n);
  const auto& q = bundled();
  std::vector<const QuestionnaireItem*> scored;
  for (const auto& item : q.items())
    if (!item.key.is_catch) scored.push_back(&item);

  const auto path = work / "fixture_store.jsonl";
  {
    StoreWriter w(path, fixture_header());
    for (const auto& [model, r] : models)
      for (const auto& [persona, c] : personas) {
        // Cell mean r*c/pbar: model margins are exact, persona margins scale by rbar/pbar.
        const double target = r * c / pbar;
        std::vector<Realization> chosen;
        double sum = 0.0;
        for (std::size_t i = 0; i < scored.size(); ++i) {
          const double want = (target * static_cast<double>(scored.size()) - sum) / static_cast<double>(scored.size() - i);
          const auto best = std::min_element(options.begin(), options.end(), [&](const auto& a, const auto& b) {
            return std::abs(a.variance - want) < std::abs(b.variance - want);
          });
          chosen.push_back(*best);
          sum += best->variance;
        }
        const Cell cell{model, persona};
        for (int s = 0; s < n; ++s) {
          std::vector<AnswerRecord> recs;
          for (const auto& item : q.items()) {
            int score = 0;
            if (item.key.is_catch) {
              score = item.part == Part::Relevance ? 0 : 5;
            } else {
              const std::size_t k = static_cast<std::size_t>(
                  std::find(scored.begin(), scored.end(), &item) - scored.begin());
              const auto& rz = chosen[k];
              score = s < rz.n0 ? 0 : (s < rz.n0 + rz.n1 ? 1 : 2);
            }
            recs.push_back(answer(cell, s, item.id, score));
          }
          w.append_sample(recs, SampleCommit{cell, s, {}});
        }
      }
  }

  auto table_value = [](const std::string& md, const std::string& row) -> std::string {
    const auto pos = md.find("| " + row + " | ");
    if (pos == std::string::npos) return "?";
    const auto start = pos + row.size() + 5;
    return md.substr(start, md.find(' ', start) - start);
  };
  std::ostringstream d;
  bool ok = true;
  const auto by_model = run_cli({"analyze", "variance", "--store", path.string(), "--by", "model"}, work);
  const auto by_persona = run_cli({"analyze", "variance", "--store", path.string(), "--by", "persona"}, work);
  if (by_model.code != 0 || by_persona.code != 0) return fail("analyze variance failed: " + by_model.err + by_persona.err);
  for (const auto& [model, r] : models) {
    const auto printed = table_value(by_model.out, model);
    if (printed != format_number(r, 3)) {
      ok = false;
      d << model << " printed " << printed << " want " << format_number(r, 3) << "; ";
    }
  }
  for (const auto& [persona, c] : personas) {
    const auto printed = table_value(by_persona.out, persona);
    if (printed != format_number(c, 3)) {
      ok = false;
      d << persona << " printed " << printed << " want " << format_number(c, 3) << "; ";
    }
  }
  // The model x persona report carries the same margins.
  const auto report = run_cli({"report", "emit", "--kind", "model-persona", "--store", path.string()}, work);
  if (report.code != 0) return fail("report emit failed: " + report.err);
  for (const auto& [model, r] : models) {
    const auto line_pos = report.out.find("| " + model + " |");
    const auto line = report.out.substr(line_pos, report.out.find('\n', line_pos) - line_pos);
    if (line.size() < 8 || line.substr(line.size() - 8) != " " + format_number(r, 3) + " |") {
      ok = false;
      d << "model-persona row '" << line << "'; ";
    }
  }
  const auto mean_pos = report.out.find("\n| mean |") + 1;
  const auto mean_line = report.out.substr(mean_pos, report.out.find('\n', mean_pos) - mean_pos);
  std::string expected_means = "| mean |";
  auto ordered = personas;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return persona_rank(a.first) < persona_rank(b.first); });
  for (const auto& [persona, c] : ordered) expected_means += " " + format_number(c, 3) + " |";
  if (mean_line.rfind(expected_means, 0) != 0) {
    ok = false;
    d << "mean row '" << mean_line << "'; ";
  }
  if (!ok) return fail(d.str());
  return pass("7 model and 4 persona variances print exactly (model, persona and model-persona tables)");
}

// ---------------------------------------------------------------------------

std::multiset<std::string> canonical_store(const fs::path& p) {
  std::multiset<std::string> out;
  for (auto j : store_lines(p)) {
    if (j.contains("exchanges"))
      for (auto& ex : j["exchanges"]) {
        ex.erase("timestamp");
        ex.erase("latency_ms");
      }
    out.insert(j.dump());
  }
  return out;
}

Outcome criterion8(const fs::path& work) {
  write(work / "resume.yaml",
        "output: interrupted.jsonl\nsamples_per_cell: 60\nseed: 99\nreask_limit: 1\n"
        "personas:\n  - {id: none}\n  - {id: conservative, ideology: conservative}\n"
        "endpoints:\n"
        "  - {name: stub-r, stub: {script: random}, max_concurrent: 2}\n"
        "  - {name: stub-p, stub: {script: persona, spread: 2}, max_concurrent: 2}\n"
        "  - {name: stub-u, stub: {script: unparseable}, max_concurrent: 2}\n");
  const auto cfg = (work / "resume.yaml").string();
  const auto interrupted = work / "interrupted.jsonl";

  // Uninterrupted reference run.
  const auto ref = run_cli({"survey", "run", "--config", cfg, "--output", (work / "reference.jsonl").string()}, work);
  if (ref.code != 0) return fail("reference run exited " + std::to_string(ref.code) + ": " + ref.err);

  const pid_t pid = spawn_cli({"survey", "run", "--config", cfg}, work / "kill.out", work / "kill.err");
  if (pid < 0) return fail("spawn failed");
  std::size_t commits = 0;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
  while (std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    const std::string text = slurp(interrupted);
    commits = 0;
    for (auto pos = text.find("\"type\":\"sample\""); pos != std::string::npos; pos = text.find("\"type\":\"sample\"", pos + 1))
      ++commits;
    if (commits >= 60) break;
  }
  kill(pid, SIGKILL);
  const int status = wait_exit(pid);
  if (status != 128 + SIGKILL) return fail("run finished before it could be killed (status " + std::to_string(status) + ")");
  // Simulate a torn write on top of whatever the kill left behind.
  {
    std::ofstream torn(interrupted, std::ios::app | std::ios::binary);
    torn << "{\"type\":\"answer\",\"endpoint\":\"stub-r\",\"persona\":\"no";
  }
  const auto resumed = run_cli({"survey", "resume", "--config", cfg}, work);
  if (resumed.code != 0) return fail("resume exited " + std::to_string(resumed.code) + ": " + resumed.err);

  const auto a = canonical_store(interrupted);
  const auto b = canonical_store(work / "reference.jsonl");
  std::ostringstream d;
  d << "killed after " << commits << " of 360 samples; resumed store " << a.size() << " lines, reference " << b.size();
  if (a != b) {
    std::vector<std::string> only_a, only_b;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only_a));
    std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(only_b));
    d << "; " << only_a.size() << " lines only in resumed, " << only_b.size() << " only in reference";
    if (!only_a.empty()) d << "; e.g. " << only_a.front().substr(0, 300);
    return fail(d.str());
  }
  return pass(d.str() + "; identical modulo timestamp/latency");
}

// ---------------------------------------------------------------------------

Outcome criterion9(const fs::path& work) {
  const auto& q = bundled();
  std::vector<std::string> warnings;
  std::vector<ValueStatement> catalog;
  try {
    catalog = lint_catalog_file(data_dir() / "value_statements.yaml", q, &warnings);
  } catch (const std::exception& e) {
    return fail(std::string("bundled catalog does not lint: ") + e.what());
  }
  if (catalog.size() != 2 || !warnings.empty()) return fail("catalog lint: expected 2 clean entries");
  const char* modifiers[] = {"strongly do not", "moderately do not", "slightly do not", "slightly", "moderately", "strongly"};
  for (const auto& s : catalog)
    for (int l = 0; l <= 5; ++l) {
      const std::string want = std::string("You ") + modifiers[l] + " agree that " + statement_clause(s.statement) + ".";
      if (render_statement_instruction(s, l).text != want) return fail("instruction mismatch: " + want);
    }
  if (render_statement_instruction(catalog[0], 5).text !=
      "You strongly agree that men and women each have different roles to play in society.")
    return fail("Agreement#9 instruction text");

  const auto profile = load_profile_file(data_dir() / "examples" / "statement_profile.yaml");
  const auto persona = build_statement_persona(catalog, profile.levels);
  write(work / "statement.yaml",
        "output: statement_store.jsonl\nsamples_per_cell: 20\nseed: 3\npersonas:\n  - id: statements\n    system_text: " +
            json(persona.system_text).dump() + "\nendpoints:\n  - {name: stub-statement, stub: {script: statement}}\n");
  const auto r = run_cli({"survey", "run", "--config", (work / "statement.yaml").string()}, work);
  if (r.code != 0) return fail("statement survey exited " + std::to_string(r.code) + ": " + r.err);
  const auto pops = load_populations(work / "statement_store.jsonl");
  if (pops.size() != 1) return fail("expected one population");
  ConsistencyOptions opts;
  opts.axis = profile.axis;
  const auto report = consistency_check(persona, catalog, pops[0], opts);
  std::ostringstream d;
  d << "2 entries lint clean; 12 instructions exact; deviations";
  for (const auto& e : report.entries) {
    d << " " << e.reference << "=" << e.deviation;
    if (e.deviation != 0.0) return fail(d.str());
  }
  return pass(d.str());
}

// ---------------------------------------------------------------------------

Outcome criterion10(const fs::path& work) {
  const char* base = std::getenv("MFQ_E2E_BASE_URL");
  const char* refs = std::getenv("MFQ_E2E_REFERENCES");
  if (!base || !*base)
    return {Outcome::Skip, "manual; set MFQ_E2E_BASE_URL (and optionally MFQ_E2E_MODEL, MFQ_E2E_REFERENCES)"};
  const char* model = std::getenv("MFQ_E2E_MODEL");
  write(work / "local.yaml", std::string("output: local.jsonl\nsamples_per_cell: 5\nseed: 1\n") +
                                 "personas:\n  - {id: none}\nendpoints:\n  - {name: local, base_url: " +
                                 json(std::string(base)).dump() + ", model: " +
                                 json(std::string(model && *model ? model : "default")).dump() + "}\n");
  const auto r = run_cli({"survey", "run", "--config", (work / "local.yaml").string()}, work);
  if (r.code != 0) return fail("local run exited " + std::to_string(r.code) + ": " + r.err);
  const std::string references =
      refs && *refs ? std::string(refs) : (data_dir() / "human_references.example.yaml").string();
  const auto c = run_cli({"analyze", "cross", "--store", (work / "local.jsonl").string(), "--references", references}, work);
  if (c.code != 0) return fail("cross exited " + std::to_string(c.code) + ": " + c.err);
  return pass("smoke run against " + std::string(base) + ":\n" + c.out);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <mfq binary>\n";
    return 2;
  }
  g_cli = fs::absolute(argv[1]).string();
  TempDir work;
  fs::path stub_store;

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, [&] { return criterion1(work.path(), &stub_store); }},
      {2, [&] { return criterion2(work.path()); }},
      {3, [] { return criterion3(); }},
      {4, [] { return criterion4(); }},
      {5, [&] { return criterion5(stub_store); }},
      {6, [] { return criterion6(); }},
      {7, [&] { return criterion7(work.path()); }},
      {8, [&] { return criterion8(work.path()); }},
      {9, [&] { return criterion9(work.path()); }},
      {10, [&] { return criterion10(work.path()); }},
  };
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o{Outcome::Fail, ""};
    try {
      o = check();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Outcome::Pass ? "PASS" : o.status == Outcome::Skip ? "SKIP" : "FAIL";
    std::cout << tag << " criterion " << id << ": " << o.detail << std::endl;
    if (o.status == Outcome::Fail && id != 10) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
