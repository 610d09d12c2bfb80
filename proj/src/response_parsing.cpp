#include "mfq/response_parsing.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>

namespace mfq {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool in_scale(char c) { return c >= '0' && c <= '5'; }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// ASCII-only lowering keeps byte offsets aligned with the raw reply.
std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::optional<ParsedAnswer> bracket_digit(std::string_view raw) {
  for (std::size_t i = 0; i + 2 < raw.size(); ++i) {
    if (raw[i] == '[' && in_scale(raw[i + 1]) && raw[i + 2] == ']')
      return ParsedAnswer{raw[i + 1] - '0', ParseStrategy::BracketDigit,
                          std::string(raw.substr(i, 3)), i};
  }
  return std::nullopt;
}

std::optional<ParsedAnswer> bare_digit(std::string_view raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!in_scale(raw[i])) continue;
    const bool digit_before = i > 0 && is_digit(raw[i - 1]);
    const bool digit_after = i + 1 < raw.size() && is_digit(raw[i + 1]);
    if (!digit_before && !digit_after)
      return ParsedAnswer{raw[i] - '0', ParseStrategy::BareDigit, std::string(raw.substr(i, 1)), i};
  }
  return std::nullopt;
}

struct LabelMatch {
  std::size_t begin;
  std::size_t end;
  int value;
};

}  // namespace

std::string_view to_string(ParseStrategy s) {
  switch (s) {
    case ParseStrategy::BracketDigit: return "bracket_digit";
    case ParseStrategy::BareDigit: return "bare_digit";
    case ParseStrategy::LabelPhrase: return "label_phrase";
  }
  return "?";
}

ParseResult parse_likert(std::string_view raw, const LikertScale& scale) {
  if (auto a = bracket_digit(raw)) return *a;
  if (auto a = bare_digit(raw)) return *a;

  const std::string text = ascii_lower(raw);
  std::vector<LabelMatch> matches;
  for (std::size_t v = 0; v < scale.labels.size(); ++v) {
    const std::string label = ascii_lower(scale.labels[v]);
    if (label.empty()) continue;
    for (auto pos = text.find(label); pos != std::string::npos; pos = text.find(label, pos + 1)) {
      const std::size_t end = pos + label.size();
      const bool bounded_left = pos == 0 || !is_word(text[pos - 1]);
      const bool bounded_right = end == text.size() || !is_word(text[end]);
      if (bounded_left && bounded_right) matches.push_back({pos, end, static_cast<int>(v)});
    }
  }

  // Drop matches nested inside a longer one ("very relevant" within "not very relevant").
  std::vector<LabelMatch> kept;
  for (const auto& m : matches) {
    const bool nested = std::any_of(matches.begin(), matches.end(), [&](const LabelMatch& o) {
      return o.begin <= m.begin && m.end <= o.end && (o.end - o.begin) > (m.end - m.begin);
    });
    if (!nested) kept.push_back(m);
  }
  if (kept.empty()) return Unparseable{std::string(raw)};

  std::set<int> values;
  for (const auto& m : kept) values.insert(m.value);
  if (values.size() > 1) return Ambiguous{std::string(raw), {values.begin(), values.end()}};

  const auto first = std::min_element(kept.begin(), kept.end(),
                                      [](const auto& a, const auto& b) { return a.begin < b.begin; });
  return ParsedAnswer{first->value, ParseStrategy::LabelPhrase,
                      std::string(raw.substr(first->begin, first->end - first->begin)), first->begin};
}

}  // namespace mfq
