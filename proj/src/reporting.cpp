#include "mfq/reporting.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "mfq/error.hpp"

namespace mfq {

namespace {

using Grid = std::vector<std::vector<std::string>>;  // first row is the header

std::optional<double> find_cell(const std::vector<VarianceCell>& cells, std::string_view row,
                                std::string_view column) {
  for (const auto& c : cells)
    if (c.row == row && c.column == column) return c.value;
  return std::nullopt;
}

std::string markdown(const Grid& grid, std::size_t label_columns) {
  std::string out;
  auto row = [&](const std::vector<std::string>& cells) {
    out += "|";
    for (const auto& c : cells) {
      std::string cell = c;
      for (std::size_t pos = cell.find('|'); pos != std::string::npos; pos = cell.find('|', pos + 2))
        cell.replace(pos, 1, "\\|");
      out += " " + cell + " |";
    }
    out += "\n";
  };
  row(grid.front());
  out += "|";
  for (std::size_t i = 0; i < grid.front().size(); ++i) out += i < label_columns ? " --- |" : " ---: |";
  out += "\n";
  for (std::size_t r = 1; r < grid.size(); ++r) row(grid[r]);
  return out;
}

std::string csv(const Grid& grid) {
  std::string out;
  for (const auto& r : grid) out += csv_record(r);
  return out;
}

std::string render_grid(const ReportSpec& spec, const Grid& grid, std::size_t label_columns) {
  return spec.format == ReportFormat::Markdown ? markdown(grid, label_columns) : csv(grid);
}

template <typename Less>
std::vector<std::string> distinct(const std::vector<VarianceCell>& cells, bool rows, Less less) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& c : cells) {
    const auto& v = rows ? c.row : c.column;
    if (seen.insert(v).second) out.push_back(v);
  }
  std::stable_sort(out.begin(), out.end(), less);
  return out;
}

bool persona_less(const std::string& a, const std::string& b) {
  return std::pair(persona_rank(a), a) < std::pair(persona_rank(b), b);
}

std::string cell_or_blank(const std::optional<double>& v, int precision) {
  return v ? format_number(*v, precision) : std::string();
}

// Pair-weighted mean of the cells matching `pred`; equals the unweighted mean over
// the underlying (population, item) pairs.
template <typename Pred>
std::optional<double> pooled(const std::vector<VarianceCell>& cells, Pred pred) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells)
    if (pred(c)) {
      sum += c.value * static_cast<double>(c.pairs);
      n += c.pairs;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

void expect_grouping(const VarianceTable& t, Grouping g, std::string_view what) {
  if (t.grouping != g)
    throw ContractViolation("kind/data mismatch: " + std::string(what) + " needs a " +
                            std::string(to_string(g)) + " table");
}

std::string model_persona(const ReportSpec& spec, const ModelPersonaVariance& d) {
  expect_grouping(d.cells, Grouping::ModelPersona, "model-persona report");
  expect_grouping(d.by_model, Grouping::Model, "model-persona report");
  expect_grouping(d.by_persona, Grouping::Persona, "model-persona report");
  const auto models = distinct(d.cells.scored, true, std::less<>());
  const auto personas = distinct(d.cells.scored, false, persona_less);
  if (models.empty()) throw ContractViolation("kind/data mismatch: empty variance table");

  Grid grid;
  std::vector<std::string> header{"model"};
  header.insert(header.end(), personas.begin(), personas.end());
  header.push_back("mean");
  grid.push_back(header);
  for (const auto& m : models) {
    std::vector<std::string> row{m};
    for (const auto& p : personas) row.push_back(cell_or_blank(d.cells.scored_value(m, p), spec.precision));
    row.push_back(cell_or_blank(d.by_model.scored_value(m), spec.precision));
    grid.push_back(std::move(row));
  }
  std::vector<std::string> mean_row{"mean"};
  for (const auto& p : personas) mean_row.push_back(cell_or_blank(d.by_persona.scored_value(p), spec.precision));
  mean_row.push_back(cell_or_blank(pooled(d.by_model.scored, [](const auto&) { return true; }), spec.precision));
  grid.push_back(std::move(mean_row));

  std::string out = render_grid(spec, grid, 1);
  if (spec.format == ReportFormat::Markdown && !d.cells.catch_items.empty()) {
    Grid catches;
    std::vector<std::string> h{"model (catch items)"};
    h.insert(h.end(), personas.begin(), personas.end());
    h.push_back("mean");
    catches.push_back(h);
    for (const auto& m : models) {
      std::vector<std::string> row{m};
      for (const auto& p : personas) row.push_back(cell_or_blank(d.cells.catch_value(m, p), spec.precision));
      row.push_back(cell_or_blank(d.by_model.catch_value(m), spec.precision));
      catches.push_back(std::move(row));
    }
    out += "\n" + markdown(catches, 1);
  }
  return out;
}

std::string persona_dimension(const ReportSpec& spec, const PersonaDimensionVariance& d) {
  expect_grouping(d.cells, Grouping::FoundationPersona, "persona-dimension report");
  const auto personas = distinct(d.cells.scored, false, persona_less);
  if (personas.empty()) throw ContractViolation("kind/data mismatch: empty variance table");

  Grid grid;
  std::vector<std::string> header{"foundation"};
  header.insert(header.end(), personas.begin(), personas.end());
  header.push_back("mean");
  grid.push_back(header);
  auto add_row = [&](const std::string& label, const std::vector<VarianceCell>& cells) {
    std::vector<std::string> row{label};
    for (const auto& p : personas) row.push_back(cell_or_blank(find_cell(cells, label, p), spec.precision));
    row.push_back(cell_or_blank(pooled(cells, [&](const auto& c) { return c.row == label; }), spec.precision));
    grid.push_back(std::move(row));
  };
  for (auto f : kFoundations) add_row(std::string(to_string(f)), d.cells.scored);
  if (!d.cells.catch_items.empty()) add_row("catch", d.cells.catch_items);
  std::vector<std::string> mean_row{"mean"};
  for (const auto& p : personas)
    mean_row.push_back(cell_or_blank(pooled(d.cells.scored, [&](const auto& c) { return c.column == p; }), spec.precision));
  mean_row.push_back(cell_or_blank(pooled(d.cells.scored, [](const auto&) { return true; }), spec.precision));
  grid.push_back(std::move(mean_row));
  return render_grid(spec, grid, 1);
}

std::string per_question(const ReportSpec& spec, const PerQuestionVariance& d) {
  if (d.cells.grouping != Grouping::QuestionModel && d.cells.grouping != Grouping::QuestionPersona)
    throw ContractViolation("kind/data mismatch: per-question report needs a question-model or question-persona table");
  if (!d.questionnaire) throw ContractViolation("kind/data mismatch: per-question report needs the questionnaire");
  std::vector<VarianceCell> all = d.cells.scored;
  all.insert(all.end(), d.cells.catch_items.begin(), d.cells.catch_items.end());
  if (all.empty()) throw ContractViolation("kind/data mismatch: empty variance table");
  const bool by_persona = d.cells.grouping == Grouping::QuestionPersona;
  const auto groups = by_persona ? distinct(all, false, persona_less) : distinct(all, false, std::less<>());

  Grid grid;
  std::vector<std::string> header{"part", "index", "item", "foundation"};
  header.insert(header.end(), groups.begin(), groups.end());
  header.push_back("mean");
  grid.push_back(header);
  for (const auto& item : d.questionnaire->items()) {
    std::vector<std::string> row{std::string(to_string(item.part)), std::to_string(item.index), item.text,
                                 to_string(item.key)};
    for (const auto& g : groups) row.push_back(cell_or_blank(find_cell(all, item.id, g), spec.precision));
    row.push_back(cell_or_blank(pooled(all, [&](const auto& c) { return c.row == item.id; }), spec.precision));
    grid.push_back(std::move(row));
  }
  return render_grid(spec, grid, 4);
}

std::string cross(const ReportSpec& spec, const CrossAlignmentMatrix& m) {
  if (m.rows.empty() || m.columns.empty()) throw ContractViolation("kind/data mismatch: empty matrix");
  Grid grid;
  std::vector<std::string> header{"model", "persona"};
  header.insert(header.end(), m.columns.begin(), m.columns.end());
  const bool md = spec.format == ReportFormat::Markdown;
  if (md) header.push_back("closest");
  grid.push_back(header);
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    std::vector<std::string> row{m.rows[r].endpoint, m.rows[r].persona};
    for (double v : m.entries[r]) row.push_back(format_number(v, spec.precision));
    if (md) row.push_back(m.columns[m.closest[r]]);
    grid.push_back(std::move(row));
  }
  return render_grid(spec, grid, 2);
}

std::string consistency(const ReportSpec& spec, const ConsistencyReport& r) {
  Grid grid;
  grid.push_back({"reference", "instructed", "observed mean", "deviation", "within tolerance", "directional"});
  for (const auto& e : r.entries) {
    grid.push_back({e.reference, std::to_string(e.instructed), format_number(e.observed_mean, spec.precision),
                    format_number(e.deviation, spec.precision), e.within_tolerance ? "yes" : "no",
                    e.directional_agreement ? (*e.directional_agreement ? "agrees" : "disagrees") : ""});
  }
  std::string out = render_grid(spec, grid, 1);
  if (spec.format == ReportFormat::Markdown)
    out += "\n" + std::to_string(r.within_count()) + " of " + std::to_string(r.entries.size()) +
           " statements within +-" + format_number(r.tolerance, spec.precision) + " (fraction " +
           format_number(r.fraction_within(), spec.precision) + ")\n";
  return out;
}

}  // namespace

std::string_view to_string(ReportKind k) {
  switch (k) {
    case ReportKind::VarianceByModelPersona: return "model-persona";
    case ReportKind::VarianceByPersonaDimension: return "persona-dimension";
    case ReportKind::VariancePerQuestion: return "per-question";
    case ReportKind::CrossEvaluation: return "cross";
    case ReportKind::Consistency: return "consistency";
  }
  return "?";
}

std::optional<ReportKind> parse_report_kind(std::string_view s) {
  for (auto k : {ReportKind::VarianceByModelPersona, ReportKind::VarianceByPersonaDimension,
                 ReportKind::VariancePerQuestion, ReportKind::CrossEvaluation, ReportKind::Consistency})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  if (s == "csv") return ReportFormat::Csv;
  return std::nullopt;
}

ModelPersonaVariance model_persona_variance(const std::vector<Population>& pops, const Questionnaire& q,
                                            const AnalysisOptions& options) {
  return {aggregate_variance(pops, Grouping::ModelPersona, q, options),
          aggregate_variance(pops, Grouping::Model, q, options),
          aggregate_variance(pops, Grouping::Persona, q, options)};
}

std::string format_number(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string csv_record(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out += f;
      continue;
    }
    out += '"';
    for (char c : f) {
      if (c == '"') out += '"';
      out += c;
    }
    out += '"';
  }
  return out + "\r\n";
}

std::string render_table(const std::vector<std::vector<std::string>>& rows, ReportFormat format,
                         std::size_t label_columns) {
  if (rows.empty()) throw ContractViolation("table needs a header row");
  return format == ReportFormat::Markdown ? markdown(rows, label_columns) : csv(rows);
}

std::string render_report(const ReportSpec& spec, const ReportData& data) {
  if (spec.precision < 0 || spec.precision > 17) throw ContractViolation("precision must be within 0..17");
  auto mismatch = [&] {
    return ContractViolation("kind/data mismatch: " + std::string(to_string(spec.kind)) +
                             " report given other data");
  };
  switch (spec.kind) {
    case ReportKind::VarianceByModelPersona:
      if (auto* d = std::get_if<ModelPersonaVariance>(&data)) return model_persona(spec, *d);
      throw mismatch();
    case ReportKind::VarianceByPersonaDimension:
      if (auto* d = std::get_if<PersonaDimensionVariance>(&data)) return persona_dimension(spec, *d);
      throw mismatch();
    case ReportKind::VariancePerQuestion:
      if (auto* d = std::get_if<PerQuestionVariance>(&data)) return per_question(spec, *d);
      throw mismatch();
    case ReportKind::CrossEvaluation:
      if (auto* d = std::get_if<CrossAlignmentMatrix>(&data)) return cross(spec, *d);
      throw mismatch();
    case ReportKind::Consistency:
      if (auto* d = std::get_if<ConsistencyReport>(&data)) return consistency(spec, *d);
      throw mismatch();
  }
  throw mismatch();
}

std::string emit_report(const ReportSpec& spec, const ReportData& data) {
  std::string doc = render_report(spec, data);
  if (!spec.output_path.empty()) {
    std::ofstream out(spec.output_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report to '" + spec.output_path.string() + "'");
    out << doc;
    if (!out) throw IoError("write to '" + spec.output_path.string() + "' failed");
  }
  return doc;
}

}  // namespace mfq
