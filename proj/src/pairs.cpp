/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/pairs.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

#include "nseen/ann_index.hpp"
#include "nseen/encoder.hpp"
#include "nseen/error.hpp"
#include "nseen/strsim.hpp"
#include "nseen/utf8.hpp"

namespace nseen {

namespace {

constexpr std::string_view kSourceNames[kPairSourceCount] = {
    "positive", "random_negative", "same_name_variant", "family_variant", "hard_negative"};

std::string format_label(double y) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", y);
  return buf;
}

}  // namespace

std::string_view to_string(PairSource s) { return kSourceNames[static_cast<std::size_t>(s)]; }

std::optional<PairSource> parse_pair_source(std::string_view s) {
  for (std::size_t i = 0; i < kPairSourceCount; ++i) {
    if (kSourceNames[i] == s) return static_cast<PairSource>(i);
  }
  return std::nullopt;
}

bool PairSet::add(TrainingPair pair) {
  if (!(pair.y >= 0.0 && pair.y <= 1.0)) throw std::invalid_argument("pair label must lie in [0, 1]");
  if (pair.name_a.empty() || pair.name_b.empty()) throw std::invalid_argument("pair names must not be empty");
  if (pair.name_a == pair.name_b && pair.y < 1.0) return false;
  const bool ordered = pair.name_a <= pair.name_b;
  Key key{ordered ? pair.name_a : pair.name_b, ordered ? pair.name_b : pair.name_a, pair.y, pair.source};
  if (!keys_.insert(std::move(key)).second) return false;
  ++counts_[static_cast<std::size_t>(pair.source)];
  pairs_.push_back(std::move(pair));
  return true;
}

std::size_t PairSet::merge(const PairSet& other) {
  std::size_t added = 0;
  for (const auto& p : other) added += add(p) ? 1 : 0;
  return added;
}

void write_pairs(const PairSet& pairs, std::ostream& out) {
  for (const auto& p : pairs) {
    out << p.name_a << '\t' << p.name_b << '\t' << format_label(p.y) << '\t' << to_string(p.source) << '\n';
  }
}

PairSet read_pairs(std::istream& in) {
  PairSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (utf8::trim(line).empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      fields.push_back(line.substr(start, tab - start));
    }
    fields.push_back(line.substr(start));
    if (fields.size() != 4) throw ParseError(line_no, "expected 4 tab-separated fields");
    double y = 0.0;
    const auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), y);
    if (ec != std::errc() || ptr != fields[2].data() + fields[2].size() || !(y >= 0.0 && y <= 1.0)) {
      throw ParseError(line_no, "label must be a number in [0, 1]");
    }
    const auto source = parse_pair_source(fields[3]);
    if (!source) throw ParseError(line_no, "unknown pair source '" + fields[3] + "'");
    if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty name");
    out.add(TrainingPair{fields[0], fields[1], y, *source});
  }
  return out;
}

FamilyMap parse_family_map(std::istream& in, const ReferenceSet& r) {
  FamilyMap families;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto trimmed = utf8::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(line_no, "expected 2 tab-separated fields");
    }
    const auto family = utf8::trim(std::string_view(line).substr(0, tab));
    const auto id = utf8::trim(std::string_view(line).substr(tab + 1));
    if (family.empty() || id.empty()) throw ParseError(line_no, "empty family or entity id");
    EntityId entity(id);
    if (!r.contains(entity)) throw ParseError(line_no, "entity '" + id + "' is not in the reference set");
    families[family].insert(std::move(entity));
  }
  return families;
}

bool share_entity(const ReferenceSet& r, std::string_view a, std::string_view b) {
  const auto& ia = r.ids_for_name(a);
  const auto& ib = r.ids_for_name(b);
  for (const auto& x : ia) {
    if (std::find(ib.begin(), ib.end(), x) != ib.end()) return true;
  }
  return false;
}

PairSet generate_positive_pairs(const ReferenceSet& r, std::size_t cap_per_entity, std::uint64_t seed) {
  if (r.empty()) throw std::invalid_argument("reference set is empty");
  if (cap_per_entity == 0) throw std::invalid_argument("cap_per_entity must be positive");
  std::mt19937_64 rng(seed);
  PairSet out;
  std::vector<std::pair<std::size_t, std::size_t>> all;
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  for (const auto& e : r.entities()) {
    all.clear();
    for (std::size_t i = 0; i < e.names.size(); ++i) {
      for (std::size_t j = i + 1; j < e.names.size(); ++j) all.emplace_back(i, j);
    }
    if (all.size() > cap_per_entity) {
      chosen.clear();
      std::sample(all.begin(), all.end(), std::back_inserter(chosen), cap_per_entity, rng);
    } else {
      chosen = all;
    }
    for (auto [i, j] : chosen) out.add(TrainingPair{e.names[i], e.names[j], 1.0, PairSource::positive});
  }
  return out;
}

PairSet sample_negative_pairs(const ReferenceSet& r, std::size_t count, std::uint64_t seed) {
  if (r.size() < 2) throw std::invalid_argument("negative sampling needs at least two entities");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> first(0, r.size() - 1);
  std::uniform_int_distribution<std::size_t> second(0, r.size() - 2);
  PairSet out;
  const std::size_t max_draws = 100 * count + 1000;
  for (std::size_t draw = 0; out.size() < count; ++draw) {
    if (draw == max_draws) {
      throw Error("could only sample " + std::to_string(out.size()) + " of " + std::to_string(count) +
                  " distinct negative pairs");
    }
    const std::size_t a = first(rng);
    std::size_t b = second(rng);
    if (b >= a) ++b;
    const auto& ea = r.entities()[a];
    const auto& eb = r.entities()[b];
    const auto& na = ea.names[std::uniform_int_distribution<std::size_t>(0, ea.names.size() - 1)(rng)];
    const auto& nb = eb.names[std::uniform_int_distribution<std::size_t>(0, eb.names.size() - 1)(rng)];
    if (na == nb || share_entity(r, na, nb)) continue;
    out.add(TrainingPair{na, nb, 0.0, PairSource::random_negative});
  }
  return out;
}

std::vector<std::string> generate_same_name_variants(std::string_view name) {
  if (name.empty()) throw std::invalid_argument("name must not be empty");
  const auto text = utf8::decode(name);
  std::u32string no_space;
  std::u32string alnum;
  std::u32string upper;
  std::u32string lower;
  for (char32_t c : text) {
    if (!utf8::is_space(c)) no_space.push_back(c);
    if (utf8::is_alnum(c)) alnum.push_back(c);
    upper.push_back(utf8::to_upper(c));
    lower.push_back(utf8::to_lower(c));
  }
  std::vector<std::string> out;
  for (const auto* v : {&no_space, &alnum, &upper, &lower}) {
    if (v->empty()) continue;
    auto s = utf8::encode(*v);
    if (s == name || std::find(out.begin(), out.end(), s) != out.end()) continue;
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

void add_measured(PairSet& out, const std::string& a, const std::string& b, PairSource source) {
  if (a == b) return;
  for (auto m : strsim::kAllMeasures) out.add(TrainingPair{a, b, strsim::similarity(m, a, b), source});
}

}  // namespace

PairSet generate_variation_pairs(const ReferenceSet& r, const FamilyMap& families, std::uint64_t seed,
                                 const VariationOptions& options) {
  PairSet out;
  for (const auto& e : r.entities()) {
    for (const auto& name : e.names) {
      for (const auto& variant : generate_same_name_variants(name)) {
        add_measured(out, name, variant, PairSource::same_name_variant);
      }
    }
  }

  std::vector<std::vector<const Entity*>> groups;
  for (const auto& [family, members] : families) {
    std::vector<const Entity*> group;
    for (const auto& id : members) {
      if (const auto* e = r.find(id)) group.push_back(e);
    }
    if (group.size() >= 2) groups.push_back(std::move(group));
  }
  if (groups.empty() || options.family_pair_budget == 0) return out;

  std::mt19937_64 rng(seed);
  const std::size_t max_draws = 20 * options.family_pair_budget + 100;
  std::size_t sampled = 0;
  for (std::size_t draw = 0; draw < max_draws && sampled < options.family_pair_budget; ++draw) {
    const auto& group = groups[std::uniform_int_distribution<std::size_t>(0, groups.size() - 1)(rng)];
    const std::size_t a = std::uniform_int_distribution<std::size_t>(0, group.size() - 1)(rng);
    std::size_t b = std::uniform_int_distribution<std::size_t>(0, group.size() - 2)(rng);
    if (b >= a) ++b;
    const auto& na = group[a]->names[std::uniform_int_distribution<std::size_t>(0, group[a]->names.size() - 1)(rng)];
    const auto& nb = group[b]->names[std::uniform_int_distribution<std::size_t>(0, group[b]->names.size() - 1)(rng)];
    if (na == nb) continue;
    add_measured(out, na, nb, PairSource::family_variant);
    ++sampled;
  }
  return out;
}

PairSet mine_hard_negatives(const EncoderModel& model, const ReferenceSet& r, const EmbeddingIndex& index,
                            std::size_t k) {
  if (index.dimension() != model.config.output_dim) {
    throw CompatibilityError("index dimension " + std::to_string(index.dimension()) + " does not match model output " +
                             std::to_string(model.config.output_dim));
  }
  PairSet out;
  if (k == 0) return out;
  const auto& store = index.store;
  for (std::size_t row = 0; row < store.size(); ++row) {
    const auto& name = store.name(row);
    const auto& entity = store.entity_id(row);
    std::size_t taken = 0;
    for (const auto& n : index.nearest(store.vector(row), k + 1)) {
      if (n.row_id == row) continue;
      if (taken++ == k) break;
      if (n.entity_id == entity || n.name == name || share_entity(r, name, n.name)) continue;
      out.add(TrainingPair{name, n.name, 0.0, PairSource::hard_negative});
    }
  }
  return out;
}

}  // namespace nseen
