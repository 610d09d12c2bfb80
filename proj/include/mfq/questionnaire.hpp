#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mfq {

enum class Foundation { Harm, Fairness, Loyalty, Authority, Purity };

inline constexpr std::array<Foundation, 5> kFoundations = {
    Foundation::Harm, Foundation::Fairness, Foundation::Loyalty, Foundation::Authority,
    Foundation::Purity};

enum class Part { Relevance, Agreement };

inline constexpr std::array<Part, 2> kParts = {Part::Relevance, Part::Agreement};

/// Scoring key entry: either one of the five foundations or the attention-check marker.
struct ItemKey {
  bool is_catch = false;
  Foundation foundation = Foundation::Harm;  // meaningless when is_catch

  static ItemKey catch_item() { return {true, Foundation::Harm}; }
  static ItemKey of(Foundation f) { return {false, f}; }
  friend bool operator==(const ItemKey& a, const ItemKey& b) {
    return a.is_catch == b.is_catch && (a.is_catch || a.foundation == b.foundation);
  }
};

std::string_view to_string(Foundation f);
std::string_view to_string(Part p);
std::string to_string(const ItemKey& key);
/// Parses `harm|fairness|loyalty|authority|purity` (case-insensitive).
std::optional<Foundation> parse_foundation(std::string_view s);
std::optional<Part> parse_part(std::string_view s);
/// Same as parse_foundation but also accepts `catch`.
std::optional<ItemKey> parse_item_key(std::string_view s);

inline constexpr int kScaleMax = 5;
inline constexpr std::size_t kItemsPerPart = 16;

/// Six-point 0..5 answer scale of one questionnaire part. Label i has value i.
struct LikertScale {
  Part part = Part::Relevance;
  std::string task;  // instruction sentence shown before the label legend
  std::array<std::string, 6> labels;

  std::optional<int> value_of(std::string_view label) const;
  const std::string& label_of(int value) const;
  /// "[0] strongly disagree, [1] ..., [5] strongly agree"
  std::string legend() const;
};

struct QuestionnaireItem {
  std::string id;
  Part part = Part::Relevance;
  int index = 0;
  std::string text;
  ItemKey key;
};

/// The standard MFQ scoring key for a 0-based item position.
ItemKey standard_mfq_key(Part part, int index);

/// Validated instrument. Immutable after construction.
class Questionnaire {
 public:
  /// Throws ValidationError listing every broken invariant.
  Questionnaire(std::vector<QuestionnaireItem> items, std::array<LikertScale, 2> scales);

  const std::vector<QuestionnaireItem>& items() const noexcept { return items_; }
  const LikertScale& scale(Part p) const { return scales_[static_cast<std::size_t>(p)]; }
  const QuestionnaireItem* find(std::string_view id) const;
  const QuestionnaireItem& at(std::string_view id) const;
  /// Position of an item in canonical order, or npos.
  std::size_t position(std::string_view id) const;
  const QuestionnaireItem& catch_item(Part p) const;
  std::vector<const QuestionnaireItem*> items_of(Foundation f) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<QuestionnaireItem> items_;  // canonical order: Relevance 0..15, Agreement 0..15
  std::array<LikertScale, 2> scales_;
};

ItemKey foundation_of(const QuestionnaireItem& item);

/// Parses a questionnaire document (YAML). Throws FormatError or ValidationError.
Questionnaire load_questionnaire(std::string_view source);
Questionnaire load_questionnaire_file(const std::filesystem::path& path);
std::string serialize_questionnaire(const Questionnaire& q);

/// Path of the MFQ file shipped with the project.
std::filesystem::path bundled_questionnaire_path();

std::string read_text_file(const std::filesystem::path& path);

}  // namespace mfq
