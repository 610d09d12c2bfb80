#include "mfq/persona.hpp"

#include <cctype>

#include "mfq/error.hpp"

namespace mfq {

std::string_view to_string(Ideology i) {
  switch (i) {
    case Ideology::Conservative: return "Conservative";
    case Ideology::Moderate: return "Moderate";
    case Ideology::Liberal: return "Liberal";
  }
  return "?";
}

std::optional<Ideology> parse_ideology(std::string_view s) {
  std::string l(s);
  for (auto& c : l) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (l == "conservative") return Ideology::Conservative;
  if (l == "moderate") return Ideology::Moderate;
  if (l == "liberal") return Ideology::Liberal;
  return std::nullopt;
}

std::string render_system_prompt(const Persona& persona, const PromptTemplates& templates) {
  if (persona.system_text) return *persona.system_text;
  if (!persona.ideology) return {};
  std::string out = templates.persona;
  static constexpr std::string_view placeholder = "{ideology}";
  const std::string name(to_string(*persona.ideology));
  for (auto pos = out.find(placeholder); pos != std::string::npos;
       pos = out.find(placeholder, pos + name.size()))
    out.replace(pos, placeholder.size(), name);
  return out;
}

std::string render_question_prompt(const QuestionnaireItem& item, const LikertScale& scale) {
  if (item.part != scale.part)
    throw ContractViolation("part mismatch: item '" + item.id + "' is " +
                            std::string(to_string(item.part)) + " but scale is " +
                            std::string(to_string(scale.part)));
  return scale.task + " Choose from the following labels: " + scale.legend() + ".\n\n" + item.text;
}

std::vector<PromptPair> render_survey(const Persona& persona, const Questionnaire& q,
                                      const PromptTemplates& templates) {
  const std::string system = render_system_prompt(persona, templates);
  std::vector<PromptPair> out;
  out.reserve(q.items().size());
  for (const auto& item : q.items())
    out.push_back({system, render_question_prompt(item, q.scale(item.part))});
  return out;
}

}  // namespace mfq
