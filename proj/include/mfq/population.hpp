#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

namespace mfq {

/// One (model endpoint, persona) combination.
struct Cell {
  std::string endpoint;
  std::string persona;

  friend auto operator<=>(const Cell&, const Cell&) = default;
  std::string label() const { return endpoint + "/" + persona; }
};

/// One filled questionnaire. Answers hold only valid 0..5 scores.
struct SurveySample {
  Cell cell;
  int sample_index = 0;
  std::map<std::string, int> answers;  // item id -> score
  std::vector<std::string> missing;    // item ids without a valid score

  bool complete() const noexcept { return missing.empty(); }
};

/// Every sample of one cell, ordered by sample_index.
struct Population {
  Cell cell;
  std::vector<SurveySample> samples;

  std::size_t complete_count() const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.complete() ? 1 : 0;
    return n;
  }
};

}  // namespace mfq
