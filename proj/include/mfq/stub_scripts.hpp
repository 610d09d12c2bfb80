#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfq/stub_server.hpp"

namespace mfq {

/// Named, seeded reply scripts for stub endpoints declared in experiment configs.
///
///   constant     always "[value]"
///   random       uniform 0..5
///   attentive    ideal catch answers (math 0, good-vs-bad 5), uniform elsewhere
///   persona      centre by ideology word in the system text (none 3, liberal 1,
///                moderate 2, conservative 4) with jitter of +-`spread`
///   statement    the instructed level for items named by "You ... agree that ..."
///                instructions in the system text, uniform elsewhere
///   echo-legend  echoes the first bracketed digit of the prompt's label legend
///   unparseable  a refusal with no digit and no label
///
/// Randomness is drawn from the request's `seed` field when present, otherwise from
/// (script seed, prompt, prompt_call_index), so replies never depend on call order.
struct StubScript {
  std::string name = "random";
  int value = 0;
  int spread = 1;
  std::uint64_t seed = 0;
};

const std::vector<std::string>& stub_script_names();

/// Throws ConfigError for unknown names or out-of-range values.
ReplyPolicy make_stub_policy(const StubScript& script);

}  // namespace mfq
