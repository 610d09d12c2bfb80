#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mfq/analysis.hpp"
#include "mfq/value_statements.hpp"

namespace mfq {

enum class ReportKind {
  VarianceByModelPersona,
  VarianceByPersonaDimension,
  VariancePerQuestion,
  CrossEvaluation,
  Consistency,
};

enum class ReportFormat { Markdown, Csv };

std::string_view to_string(ReportKind k);
std::optional<ReportKind> parse_report_kind(std::string_view s);
std::optional<ReportFormat> parse_report_format(std::string_view s);

struct ReportSpec {
  ReportKind kind = ReportKind::VarianceByModelPersona;
  ReportFormat format = ReportFormat::Markdown;
  std::filesystem::path output_path;  // empty: render only
  int precision = 3;
};

/// Model x persona grid with per-model and per-persona margins.
struct ModelPersonaVariance {
  VarianceTable cells;       // Grouping::ModelPersona
  VarianceTable by_model;    // Grouping::Model
  VarianceTable by_persona;  // Grouping::Persona
};

struct PersonaDimensionVariance {
  VarianceTable cells;  // Grouping::FoundationPersona
};

struct PerQuestionVariance {
  VarianceTable cells;  // Grouping::QuestionModel or Grouping::QuestionPersona
  const Questionnaire* questionnaire = nullptr;
};

using ReportData = std::variant<ModelPersonaVariance, PersonaDimensionVariance, PerQuestionVariance,
                                CrossAlignmentMatrix, ConsistencyReport>;

ModelPersonaVariance model_persona_variance(const std::vector<Population>& pops, const Questionnaire& q,
                                            const AnalysisOptions& options = {});

/// Fixed-point with `precision` decimals; never prints "-0.000".
std::string format_number(double v, int precision = 3);

/// One RFC-4180 record terminated by CRLF.
std::string csv_record(const std::vector<std::string>& fields);

/// Generic table: first row is the header; the first `label_columns` columns are
/// left-aligned text in Markdown.
std::string render_table(const std::vector<std::vector<std::string>>& rows, ReportFormat format,
                         std::size_t label_columns = 1);

/// Deterministic rendering. Throws ContractViolation on kind/data mismatch.
std::string render_report(const ReportSpec& spec, const ReportData& data);

/// Renders and, when spec.output_path is set, writes the document (IoError on failure).
std::string emit_report(const ReportSpec& spec, const ReportData& data);

}  // namespace mfq
