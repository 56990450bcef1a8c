/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/strsim.hpp"

#include <algorithm>
#include <set>
#include <vector>

#include "nseen/utf8.hpp"

namespace nseen::strsim {

std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return a.size();

  // Single row over the shorter string.
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t subst = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, subst});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein_distance(std::string_view a, std::string_view b) {
  return levenshtein_distance(utf8::decode(a), utf8::decode(b));
}

double levenshtein_sim(std::string_view a, std::string_view b) {
  const auto ua = utf8::decode(a);
  const auto ub = utf8::decode(b);
  const auto longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein_distance(ua, ub)) / static_cast<double>(longest);
}

double jaro_sim(std::u32string_view a, std::u32string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;

  const std::size_t window = std::max(a.size(), b.size()) / 2 > 0 ? std::max(a.size(), b.size()) / 2 - 1 : 0;
  std::vector<char> a_matched(a.size(), 0);
  std::vector<char> b_matched(b.size(), 0);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(b.size(), i + window + 1);
    for (std::size_t j = lo; j < hi; ++j) {
      if (!b_matched[j] && a[i] == b[j]) {
        a_matched[i] = b_matched[j] = 1;
        ++matches;
        break;
      }
    }
  }
  if (matches == 0) return 0.0;

  std::size_t half_transpositions = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a_matched[i]) continue;
    while (!b_matched[k]) ++k;
    if (a[i] != b[k]) ++half_transpositions;
    ++k;
  }
  const double m = static_cast<double>(matches);
  const double t = static_cast<double>(half_transpositions / 2);
  return (m / static_cast<double>(a.size()) + m / static_cast<double>(b.size()) + (m - t) / m) / 3.0;
}

double jaro_winkler_sim(std::string_view a, std::string_view b) {
  const auto ua = utf8::decode(a);
  const auto ub = utf8::decode(b);
  const double jaro = jaro_sim(ua, ub);
  std::size_t prefix = 0;
  const std::size_t limit = std::min({ua.size(), ub.size(), kJaroWinklerMaxPrefix});
  while (prefix < limit && ua[prefix] == ub[prefix]) ++prefix;
  return std::min(1.0, jaro + static_cast<double>(prefix) * kJaroWinklerPrefixWeight * (1.0 - jaro));
}

namespace {

std::set<std::u32string> trigrams(const std::u32string& s) {
  std::set<std::u32string> grams;
  if (s.empty()) return grams;
  if (s.size() < 3) {
    grams.insert(s);
    return grams;
  }
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) grams.insert(s.substr(i, 3));
  return grams;
}

}  // namespace

double trigram_jaccard_sim(std::string_view a, std::string_view b) {
  const auto ga = trigrams(utf8::decode(a));
  const auto gb = trigrams(utf8::decode(b));
  if (ga.empty() && gb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& g : ga) common += gb.count(g);
  const std::size_t uni = ga.size() + gb.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

double similarity(Measure m, std::string_view a, std::string_view b) {
  switch (m) {
    case Measure::trigram_jaccard:
      return trigram_jaccard_sim(a, b);
    case Measure::levenshtein:
      return levenshtein_sim(a, b);
    case Measure::jaro_winkler:
      return jaro_winkler_sim(a, b);
  }
  return 0.0;
}

std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::trigram_jaccard:
      return "trigram_jaccard";
    case Measure::levenshtein:
      return "levenshtein";
    case Measure::jaro_winkler:
      return "jaro_winkler";
  }
  return "?";
}

}  // namespace nseen::strsim
