#pragma once

#include "odrpo/types.hpp"

#include <string>

namespace odrpo {

/// Writes the policy as plain text, one state per line, |A| probabilities at
/// 17 significant digits (round-trips doubles exactly).
void save_policy_text(const TabularPolicy& policy, const std::string& path);

/// Parses a policy written by save_policy_text. Throws std::runtime_error on
/// malformed input or any row that is not a probability distribution.
TabularPolicy load_policy_text(const std::string& path, double row_sum_tol = 1e-6);

} // namespace odrpo
