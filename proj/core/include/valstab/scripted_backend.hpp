#pragma once

#include <map>
#include <string>
#include <tuple>

#include "valstab/backend.hpp"

namespace valstab {

/// Deterministic offline backend. Replies are a function of the request
/// metadata and the configured seed, so whole pipeline runs have known
/// stability outcomes:
///   FixedPerPersona  answers depend only on (persona, item)
///   UniformRandom    answers are independent draws per prompt
///   DriftAfterK      persona answers decay towards one shared (neutral)
///                    sheet once more than k messages were exchanged
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(BackendConfig config);

  std::string complete(const Request& request) override;
  TokenDistribution next_token_distribution(const Request& request) override;

  /// Canonical letter this backend associates with (persona, item). An empty
  /// persona gives the neutral sheet.
  char table_letter(const std::string& persona, Instrument instrument, int item,
                    std::size_t n_options) const;

  /// Probability that a DriftAfterK answer comes from the neutral sheet.
  double drift_probability(int n_exchanged) const;

 private:
  std::map<std::tuple<std::string, Instrument, int>, char> table_;
};

}  // namespace valstab
