#include "mfq/cli.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "mfq/analysis.hpp"
#include "mfq/error.hpp"
#include "mfq/experiment_config.hpp"
#include "mfq/model_client.hpp"
#include "mfq/record_store.hpp"
#include "mfq/reporting.hpp"
#include "mfq/survey_runner.hpp"
#include "mfq/value_statements.hpp"

namespace mfq {

namespace {

namespace fs = std::filesystem;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

std::filesystem::path bundled_catalog_path() { return fs::path(MFQ_DATA_DIR) / "value_statements.yaml"; }

// Options shared by the analysis-style commands.
struct AnalysisFlags {
  std::string store;
  std::string estimator = "population";
  bool exclude_flagged = false;
  std::string policy;
  bool include_partial = false;
  std::string format = "markdown";
  int precision = 3;
  std::string output;

  void add_to(CLI::App* cmd, bool with_store_required = true) {
    auto* s = cmd->add_option("--store", store, "Record store (JSONL) written by `survey run`");
    if (with_store_required) s->required();
    cmd->add_option("--estimator", estimator, "population (divide by N) or sample (N-1)")
        ->check(CLI::IsMember({"population", "sample"}));
    cmd->add_flag("--exclude-flagged", exclude_flagged, "Leave out samples flagged by the catch policy");
    cmd->add_option("--policy", policy, "Catch policy, e.g. relevance_max=3,agreement_min=3");
    cmd->add_flag("--include-partial", include_partial, "Use answered items of partial samples");
    cmd->add_option("--format", format, "markdown or csv")->check(CLI::IsMember({"markdown", "md", "csv"}));
    cmd->add_option("--precision", precision, "Decimals in printed numbers")->check(CLI::Range(0, 17));
    cmd->add_option("--output", output, "Also write the document to this file");
  }

  AnalysisOptions options() const {
    AnalysisOptions o;
    o.include_partial = include_partial;
    o.estimator = estimator == "sample" ? VarianceEstimator::Sample : VarianceEstimator::Population;
    if (exclude_flagged) o.exclude_flagged = parse_catch_policy(policy);
    return o;
  }

  ReportFormat report_format() const { return *parse_report_format(format); }
};

struct LoadedStore {
  StoreContents contents;
  std::unique_ptr<Questionnaire> questionnaire;
  std::vector<Population> populations;
};

LoadedStore load_store(const std::string& path, std::ostream& err) {
  if (!fs::exists(path)) throw IoError("store '" + path + "' does not exist");
  LoadedStore s;
  s.contents = read_store(path);
  for (const auto& w : s.contents.warnings) err << "warning: " << w << '\n';
  if (!s.contents.header) throw IoError("'" + path + "' is not a survey store");
  s.questionnaire = std::make_unique<Questionnaire>(store_questionnaire(s.contents));
  s.populations = build_populations(s.contents);
  return s;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

void deliver(const std::string& doc, const std::string& output, std::ostream& out) {
  out << doc;
  if (output.empty()) return;
  std::ofstream f(output, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + output + "'");
  f << doc;
  if (!f) throw IoError("write to '" + output + "' failed");
}

Cell parse_cell(const std::string& s) {
  const auto slash = s.rfind('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == s.size())
    throw ConfigError("--cell expects endpoint/persona, got '" + s + "'");
  return {s.substr(0, slash), s.substr(slash + 1)};
}

const Population& pick_population(const std::vector<Population>& pops, const std::string& cell) {
  if (cell.empty()) {
    if (pops.size() == 1) return pops.front();
    throw ConfigError("store holds " + std::to_string(pops.size()) + " cells; choose one with --cell");
  }
  const Cell c = parse_cell(cell);
  for (const auto& p : pops)
    if (p.cell == c) return p;
  throw ConfigError("store has no cell '" + cell + "'");
}

// --- survey -----------------------------------------------------------------

struct SurveyFlags {
  std::string config;
  std::string output;
  bool overwrite = false;
  std::string store;
};

ExperimentConfig load_config(const SurveyFlags& f) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config_file(f.config);
  } catch (const FormatError& e) {
    throw ConfigError(f.config + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  if (!f.output.empty()) cfg.output_path = fs::absolute(f.output);
  return cfg;
}

std::string status_table(const RunSummary& s) {
  std::vector<std::vector<std::string>> rows{{"cell", "complete", "partial", "expected"}};
  for (const auto& c : s.cells)
    rows.push_back({c.cell.label(), std::to_string(c.complete), std::to_string(c.partial),
                    std::to_string(c.expected)});
  return render_table(rows, ReportFormat::Markdown);
}

int survey_execute(const SurveyFlags& f, bool resume, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = load_config(f);
  validate(cfg);
  std::error_code ec;
  const bool exists = fs::exists(cfg.output_path, ec) && fs::file_size(cfg.output_path, ec) > 0;
  if (resume && !exists)
    throw ConfigError("nothing to resume: '" + cfg.output_path.string() + "' does not exist");
  if (!resume && exists) {
    if (!f.overwrite)
      throw ConfigError("store '" + cfg.output_path.string() +
                        "' already exists; use `survey resume` or --overwrite");
    fs::remove(cfg.output_path);
  }

  StubFleet fleet(cfg);
  for (const auto& e : cfg.endpoints)
    if (e.stub) err << "stub " << e.endpoint.name << " listening on " << e.endpoint.base_url << '\n';

  RunOptions opts;
  opts.stop_requested = [] { return g_stop.load(); };
  opts.log = &err;
  const RunSummary s = run_experiment(cfg, opts);
  out << "store: " << cfg.output_path.string() << '\n'
      << "surveys: " << s.surveys << " (" << s.complete_surveys << " complete)\n"
      << "answer records written: " << s.answer_records << '\n'
      << "exchanges written: " << s.exchanges << '\n';
  if (s.stopped) {
    err << "interrupted; run `survey resume` to continue\n";
    return kExitInternal;
  }
  if (s.client_failures > 0) {
    err << s.client_failures << " sample(s) left partial by endpoint failures\n";
    return kExitNetwork;
  }
  return kExitOk;
}

int survey_status(const SurveyFlags& f, std::ostream& out) {
  fs::path store = f.store;
  if (store.empty()) {
    if (f.config.empty()) throw ConfigError("survey status needs --store or --config");
    store = load_config(f).output_path;
  }
  if (!fs::exists(store)) throw IoError("store '" + store.string() + "' does not exist");
  const RunSummary s = store_status(store);
  out << status_table(s) << "surveys: " << s.surveys << " (" << s.complete_surveys << " complete)\n"
      << "answer records: " << s.answer_records << '\n'
      << "exchanges: " << s.exchanges << '\n';
  return kExitOk;
}

// --- analyze ----------------------------------------------------------------

std::string variance_document(const LoadedStore& s, Grouping by, const AnalysisFlags& f, std::ostream& err) {
  const auto opts = f.options();
  ReportSpec spec;
  spec.format = f.report_format();
  spec.precision = f.precision;
  const auto& q = *s.questionnaire;
  switch (by) {
    case Grouping::ModelPersona: {
      auto d = model_persona_variance(s.populations, q, opts);
      print_warnings(d.cells.warnings, err);
      spec.kind = ReportKind::VarianceByModelPersona;
      return render_report(spec, d);
    }
    case Grouping::FoundationPersona: {
      PersonaDimensionVariance d{aggregate_variance(s.populations, by, q, opts)};
      print_warnings(d.cells.warnings, err);
      spec.kind = ReportKind::VarianceByPersonaDimension;
      return render_report(spec, d);
    }
    case Grouping::QuestionModel:
    case Grouping::QuestionPersona: {
      PerQuestionVariance d{aggregate_variance(s.populations, by, q, opts), &q};
      print_warnings(d.cells.warnings, err);
      spec.kind = ReportKind::VariancePerQuestion;
      return render_report(spec, d);
    }
    case Grouping::Model:
    case Grouping::Persona: {
      const auto t = aggregate_variance(s.populations, by, q, opts);
      print_warnings(t.warnings, err);
      std::vector<std::vector<std::string>> rows{
          {by == Grouping::Model ? "model" : "persona", "variance", "catch variance"}};
      for (const auto& c : t.scored) {
        const auto cv = t.catch_value(c.row);
        rows.push_back({c.row, format_number(c.value, f.precision), cv ? format_number(*cv, f.precision) : ""});
      }
      return render_table(rows, spec.format);
    }
  }
  throw ContractViolation("unhandled grouping");
}

std::string cross_document(const LoadedStore& s, const std::string& references, const AnalysisFlags& f) {
  const auto refs = load_human_references_file(references);
  auto opts = f.options();
  opts.aggregation = refs.aggregation;
  ReportSpec spec{ReportKind::CrossEvaluation, f.report_format(), {}, f.precision};
  return render_report(spec, cross_matrix(s.populations, refs, *s.questionnaire, opts));
}

int analyze_catch(const AnalysisFlags& f, bool list, std::ostream& out, std::ostream& err) {
  const auto s = load_store(f.store, err);
  const CatchPolicy policy = parse_catch_policy(f.policy);
  std::vector<std::vector<std::string>> rows{{"cell", "checked", "valid", "flagged", "flagged fraction", "unchecked"}};
  std::vector<std::vector<std::string>> flagged_rows{{"cell", "sample", "reasons"}};
  for (const auto& p : s.populations) {
    std::size_t valid = 0, flagged = 0, unchecked = 0;
    for (const auto& sample : p.samples) {
      if (!sample.complete()) {
        ++unchecked;
        continue;
      }
      const auto v = catch_validity(sample, *s.questionnaire, policy);
      if (v.valid) {
        ++valid;
        continue;
      }
      ++flagged;
      std::string reasons;
      for (const auto& r : v.reasons) reasons += (reasons.empty() ? "" : "; ") + r;
      flagged_rows.push_back({p.cell.label(), std::to_string(sample.sample_index), reasons});
    }
    const std::size_t checked = valid + flagged;
    rows.push_back({p.cell.label(), std::to_string(checked), std::to_string(valid), std::to_string(flagged),
                    checked ? format_number(static_cast<double>(flagged) / static_cast<double>(checked),
                                            f.precision)
                            : "",
                    std::to_string(unchecked)});
  }
  std::string doc = render_table(rows, f.report_format());
  if (list && flagged_rows.size() > 1) {
    if (f.report_format() == ReportFormat::Markdown) doc += "\n";
    doc += render_table(flagged_rows, f.report_format());
  }
  deliver(doc, f.output, out);
  return kExitOk;
}

// --- value statements ---------------------------------------------------------

struct StatementFlags {
  std::string catalog;
  std::string questionnaire;
  std::string profile;
  std::string cell;
  double tolerance = 1.0;
  bool strict = false;
  std::string id;

  void add_catalog(CLI::App* cmd) {
    cmd->add_option("--catalog", catalog, "Value-statement catalog (default: bundled)");
  }

  fs::path catalog_path() const { return catalog.empty() ? bundled_catalog_path() : fs::path(catalog); }
};

std::vector<ValueStatement> load_catalog(const StatementFlags& f, const Questionnaire& q, std::ostream& err) {
  std::vector<std::string> warnings;
  auto cat = lint_catalog_file(f.catalog_path(), q, &warnings);
  print_warnings(warnings, err);
  return cat;
}

std::string consistency_document(const LoadedStore& s, const StatementFlags& sf, const AnalysisFlags& af,
                                 bool* consistent, std::ostream& err) {
  const auto catalog = load_catalog(sf, *s.questionnaire, err);
  const auto profile = load_profile_file(sf.profile);
  const auto persona = build_statement_persona(catalog, profile.levels);
  const auto& pop = pick_population(s.populations, sf.cell);
  ConsistencyOptions opts;
  opts.tolerance = sf.tolerance;
  opts.axis = profile.axis;
  opts.include_partial = af.include_partial;
  const auto report = consistency_check(persona, catalog, pop, opts);
  if (consistent) *consistent = report.consistent();
  ReportSpec spec{ReportKind::Consistency, af.report_format(), {}, af.precision};
  return render_report(spec, report);
}

// --- error mapping ------------------------------------------------------------

int report_error(std::ostream& err, std::string_view kind, const std::exception& e, int code) {
  err << "error (" << kind << "): " << e.what() << '\n';
  return code;
}

const CLI::App* deepest_selected(const CLI::App* app) {
  for (const auto* sub : app->get_subcommands())
    if (sub->parsed()) return deepest_selected(sub);
  return app;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Survey language models with the Moral Foundations Questionnaire and analyse the answers.",
               "mfq"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SurveyFlags survey_flags;
  AnalysisFlags af;
  StatementFlags sf;
  std::string by = "model-persona";
  std::string references;
  bool list_flagged = false;
  std::string kind;
  std::string per_question_by = "question-model";
  bool yaml_persona = false;

  auto* survey = app.add_subcommand("survey", "Run, resume and inspect surveys");
  survey->require_subcommand(1);
  auto* run = survey->add_subcommand("run", "Start a survey run from an experiment config");
  run->add_option("--config", survey_flags.config, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--output", survey_flags.output, "Override the store path from the config");
  run->add_flag("--overwrite", survey_flags.overwrite, "Replace an existing store");
  auto* resume = survey->add_subcommand("resume", "Continue an interrupted run; committed samples are kept");
  resume->add_option("--config", survey_flags.config, "Experiment config (YAML)")
      ->required()
      ->check(CLI::ExistingFile);
  resume->add_option("--output", survey_flags.output, "Override the store path from the config");
  auto* status = survey->add_subcommand("status", "Per-cell progress of a store");
  status->add_option("--store", survey_flags.store, "Record store");
  status->add_option("--config", survey_flags.config, "Experiment config naming the store")
      ->check(CLI::ExistingFile);

  auto* analyze = app.add_subcommand("analyze", "Variance, cross-alignment and catch-item analysis");
  analyze->require_subcommand(1);
  auto* variance = analyze->add_subcommand("variance", "Mean per-question response variance by group");
  variance->add_option("--by", by, "model, persona, model-persona, foundation-persona, question-model, question-persona")
      ->check(CLI::IsMember({"model", "persona", "model-persona", "foundation-persona", "question-model",
                             "question-persona"}));
  af.add_to(variance);
  auto* cross = analyze->add_subcommand("cross", "L1 distance of foundation scores to human reference groups");
  cross->add_option("--references", references, "Human reference file (YAML)")->required();
  af.add_to(cross);
  auto* catch_cmd = analyze->add_subcommand("catch", "Catch-item validity per cell");
  catch_cmd->add_flag("--list", list_flagged, "Also list every flagged sample");
  af.add_to(catch_cmd);

  auto* catalog = app.add_subcommand("catalog", "Value-statement catalogs");
  catalog->require_subcommand(1);
  auto* lint = catalog->add_subcommand("lint", "Check a catalog against the questionnaire scoring key");
  sf.add_catalog(lint);
  lint->add_option("--questionnaire", sf.questionnaire, "Questionnaire file (default: bundled)");

  auto* persona = app.add_subcommand("persona", "Statement-built personas");
  persona->require_subcommand(1);
  auto* build = persona->add_subcommand("build", "Render the system text for a statement profile");
  sf.add_catalog(build);
  build->add_option("--profile", sf.profile, "Profile: statement reference -> level 0..5")->required();
  build->add_option("--questionnaire", sf.questionnaire, "Questionnaire file (default: bundled)");
  build->add_option("--id", sf.id, "Print a persona entry with this id for an experiment config");
  build->add_flag("--yaml", yaml_persona, "Print the persona as a config entry (needs --id)");
  build->add_option("--output", af.output, "Also write the result to this file");
  auto* check = persona->add_subcommand("check", "Compare instructed levels with observed answers");
  sf.add_catalog(check);
  check->add_option("--profile", sf.profile, "Profile used to build the persona")->required();
  check->add_option("--cell", sf.cell, "endpoint/persona to check (needed when the store has several)");
  check->add_option("--tolerance", sf.tolerance, "Allowed |observed mean - instructed level|")
      ->check(CLI::NonNegativeNumber);
  check->add_flag("--strict", sf.strict, "Exit with the validation code when any statement is off");
  af.add_to(check);

  auto* report = app.add_subcommand("report", "Variance, cross-alignment and consistency tables");
  report->require_subcommand(1);
  auto* emit = report->add_subcommand("emit", "Render one report from a store");
  emit->add_option("--kind", kind, "model-persona, persona-dimension, per-question, cross, consistency")
      ->required()
      ->check(CLI::IsMember({"model-persona", "persona-dimension", "per-question", "cross", "consistency"}));
  emit->add_option("--references", references, "Human reference file (cross)");
  sf.add_catalog(emit);
  emit->add_option("--profile", sf.profile, "Statement profile (consistency)");
  emit->add_option("--cell", sf.cell, "endpoint/persona (consistency)");
  emit->add_option("--tolerance", sf.tolerance, "Consistency tolerance")->check(CLI::NonNegativeNumber);
  emit->add_option("--by", per_question_by, "question-model or question-persona (per-question)")
      ->check(CLI::IsMember({"question-model", "question-persona"}));
  af.add_to(emit);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error (usage): " << e.what() << "\n\n" << deepest_selected(&app)->help();
    return kExitConfig;
  }

  try {
    if (run->parsed()) return survey_execute(survey_flags, false, out, err);
    if (resume->parsed()) return survey_execute(survey_flags, true, out, err);
    if (status->parsed()) return survey_status(survey_flags, out);

    if (variance->parsed()) {
      const auto s = load_store(af.store, err);
      deliver(variance_document(s, *parse_grouping(by), af, err), af.output, out);
      return kExitOk;
    }
    if (cross->parsed()) {
      const auto s = load_store(af.store, err);
      deliver(cross_document(s, references, af), af.output, out);
      return kExitOk;
    }
    if (catch_cmd->parsed()) return analyze_catch(af, list_flagged, out, err);

    if (lint->parsed() || build->parsed()) {
      const Questionnaire q = load_questionnaire_file(sf.questionnaire.empty() ? bundled_questionnaire_path()
                                                                               : fs::path(sf.questionnaire));
      const auto cat = load_catalog(sf, q, err);
      if (lint->parsed()) {
        out << "ok: " << cat.size() << " statement(s) in " << sf.catalog_path().string() << '\n';
        return kExitOk;
      }
      const auto profile = load_profile_file(sf.profile);
      const auto sp = build_statement_persona(cat, profile.levels);
      std::string doc;
      if (yaml_persona) {
        if (sf.id.empty()) throw ConfigError("--yaml needs --id");
        YAML::Emitter y;
        y << YAML::BeginSeq << YAML::BeginMap << YAML::Key << "id" << YAML::Value << sf.id << YAML::Key
          << "system_text" << YAML::Value << YAML::DoubleQuoted << sp.system_text << YAML::EndMap
          << YAML::EndSeq;
        doc = std::string(y.c_str()) + "\n";
      } else {
        doc = sp.system_text + "\n";
      }
      deliver(doc, af.output, out);
      return kExitOk;
    }
    if (check->parsed()) {
      const auto s = load_store(af.store, err);
      bool consistent = true;
      deliver(consistency_document(s, sf, af, &consistent, err), af.output, out);
      return (sf.strict && !consistent) ? kExitValidation : kExitOk;
    }

    if (emit->parsed()) {
      const auto s = load_store(af.store, err);
      const ReportKind k = *parse_report_kind(kind);
      std::string doc;
      switch (k) {
        case ReportKind::VarianceByModelPersona:
          doc = variance_document(s, Grouping::ModelPersona, af, err);
          break;
        case ReportKind::VarianceByPersonaDimension:
          doc = variance_document(s, Grouping::FoundationPersona, af, err);
          break;
        case ReportKind::VariancePerQuestion:
          doc = variance_document(s, *parse_grouping(per_question_by), af, err);
          break;
        case ReportKind::CrossEvaluation:
          if (references.empty()) throw ConfigError("--kind cross needs --references");
          doc = cross_document(s, references, af);
          break;
        case ReportKind::Consistency:
          if (sf.profile.empty()) throw ConfigError("--kind consistency needs --profile");
          doc = consistency_document(s, sf, af, nullptr, err);
          break;
      }
      deliver(doc, af.output, out);
      return kExitOk;
    }
    throw ContractViolation("no command selected");
  } catch (const ConfigError& e) {
    return report_error(err, "config", e, kExitConfig);
  } catch (const ClientError& e) {
    return report_error(err, "network", e, kExitNetwork);
  } catch (const ValidationError& e) {
    err << "error (validation):\n";
    for (const auto& v : e.violations()) err << "  " << v << '\n';
    return kExitValidation;
  } catch (const FormatError& e) {
    return report_error(err, "validation", e, kExitValidation);
  } catch (const EmptyPopulationError& e) {
    return report_error(err, "validation", e, kExitValidation);
  } catch (const ContractViolation& e) {
    return report_error(err, "validation", e, kExitValidation);
  } catch (const IoError& e) {
    return report_error(err, "io", e, kExitIo);
  } catch (const fs::filesystem_error& e) {
    return report_error(err, "io", e, kExitIo);
  } catch (const std::exception& e) {
    return report_error(err, "internal", e, kExitInternal);
  }
}

int cli_main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace mfq
