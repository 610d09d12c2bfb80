#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mfq/questionnaire.hpp"

namespace mfq {

enum class ParseStrategy { BracketDigit, BareDigit, LabelPhrase };

std::string_view to_string(ParseStrategy s);

struct ParsedAnswer {
  int score = 0;
  ParseStrategy strategy = ParseStrategy::BracketDigit;
  std::string matched_span;
  std::size_t offset = 0;  // byte offset of matched_span in the raw reply
};

struct Unparseable {
  std::string raw;
};

/// Several label phrases with different values and no digit to break the tie.
struct Ambiguous {
  std::string raw;
  std::vector<int> candidates;  // ascending, distinct
};

using ParseResult = std::variant<ParsedAnswer, Unparseable, Ambiguous>;

/// Total over arbitrary bytes. Strategies, first success wins:
///   1. first `[d]` with d in 0..5
///   2. first digit 0..5 not adjacent to another digit
///   3. label phrases of `scale`, case-insensitive, longest match; conflicting labels are Ambiguous
ParseResult parse_likert(std::string_view raw, const LikertScale& scale);

inline bool parsed(const ParseResult& r) { return std::holds_alternative<ParsedAnswer>(r); }

}  // namespace mfq
