/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace nseen::strsim {

// All measures compare Unicode scalar values decoded from UTF-8, case
// sensitively. Similarities lie in [0, 1] and are symmetric.

std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein_distance(std::string_view a, std::string_view b);

/// 1 - distance / max(|a|, |b|); 1 when both strings are empty.
double levenshtein_sim(std::string_view a, std::string_view b);

inline constexpr double kJaroWinklerPrefixWeight = 0.1;
inline constexpr std::size_t kJaroWinklerMaxPrefix = 4;

double jaro_sim(std::u32string_view a, std::u32string_view b);

/// Jaro similarity boosted by the common prefix (weight 0.1, at most four
/// characters). No boost threshold is applied.
double jaro_winkler_sim(std::string_view a, std::string_view b);

/// Jaccard coefficient over the sets of contiguous 3-character substrings.
/// A string shorter than three characters is its own single gram; two empty
/// strings score 1.
double trigram_jaccard_sim(std::string_view a, std::string_view b);

enum class Measure { trigram_jaccard, levenshtein, jaro_winkler };

inline constexpr Measure kAllMeasures[] = {Measure::trigram_jaccard, Measure::levenshtein, Measure::jaro_winkler};

double similarity(Measure m, std::string_view a, std::string_view b);

std::string_view to_string(Measure m);

}  // namespace nseen::strsim
