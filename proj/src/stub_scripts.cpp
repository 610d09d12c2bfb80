#include "mfq/stub_scripts.hpp"

#include <algorithm>
#include <cctype>

#include "mfq/error.hpp"
#include "mfq/hashing.hpp"
#include "mfq/value_statements.hpp"

namespace mfq {

namespace {

std::uint64_t draw(const StubScript& script, const StubRequest& req) {
  if (req.seed) return splitmix64(*req.seed ^ splitmix64(script.seed));
  std::uint64_t h = fnv1a64(req.system_text);
  h = fnv1a64(req.user_text, h);
  return hash_combine(hash_combine(script.seed, h), req.prompt_call_index);
}

int uniform_score(std::uint64_t r) { return static_cast<int>(r % 6); }

StubReply digit(int d) { return StubReply::text("[" + std::to_string(d) + "]"); }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

}  // namespace

const std::vector<std::string>& stub_script_names() {
  static const std::vector<std::string> names = {"constant",  "random",      "attentive", "persona",
                                                 "statement", "echo-legend", "unparseable"};
  return names;
}

ReplyPolicy make_stub_policy(const StubScript& script) {
  const auto& names = stub_script_names();
  if (std::find(names.begin(), names.end(), script.name) == names.end())
    throw ConfigError("unknown stub script '" + script.name + "'");

  if (script.name == "constant") {
    if (script.value < 0 || script.value > kScaleMax)
      throw ConfigError("stub script 'constant' needs value in 0..5");
    return [v = script.value](const StubRequest&) { return digit(v); };
  }
  if (script.name == "random")
    return [script](const StubRequest& r) { return digit(uniform_score(draw(script, r))); };
  if (script.name == "attentive") {
    return [script](const StubRequest& r) {
      if (contains(r.user_text, "good at math")) return digit(0);
      if (contains(r.user_text, "better to do good than to do bad")) return digit(kScaleMax);
      return digit(uniform_score(draw(script, r)));
    };
  }
  if (script.name == "persona") {
    if (script.spread < 0) throw ConfigError("stub script 'persona' needs spread >= 0");
    return [script](const StubRequest& r) {
      const std::string sys = ascii_lower(r.system_text);
      int centre = 3;
      if (contains(sys, "liberal")) centre = 1;
      if (contains(sys, "moderate")) centre = 2;
      if (contains(sys, "conservative")) centre = 4;
      const int width = 2 * script.spread + 1;
      const int jitter = static_cast<int>(draw(script, r) % static_cast<std::uint64_t>(width)) - script.spread;
      return digit(std::clamp(centre + jitter, 0, kScaleMax));
    };
  }
  if (script.name == "statement") {
    return [script](const StubRequest& r) {
      const std::string user = ascii_lower(r.user_text);
      for (const auto& [level, clause] : parse_statement_instructions(r.system_text)) {
        if (!clause.empty() && contains(user, ascii_lower(clause))) return digit(level);
      }
      return digit(uniform_score(draw(script, r)));
    };
  }
  if (script.name == "echo-legend") {
    return [](const StubRequest& r) {
      const auto& t = r.user_text;
      for (std::size_t i = 0; i + 2 < t.size(); ++i)
        if (t[i] == '[' && std::isdigit(static_cast<unsigned char>(t[i + 1])) && t[i + 2] == ']')
          return StubReply::text(t.substr(i, 3));
      return StubReply::text("no legend");
    };
  }
  return [](const StubRequest&) { return StubReply::text("As an AI I cannot have opinions."); };
}

}  // namespace mfq
