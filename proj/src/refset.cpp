/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/refset.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "nseen/error.hpp"
#include "nseen/utf8.hpp"

namespace nseen {

namespace {

/// Splits a line on tabs. A trailing CR (CRLF files) is dropped first.
std::vector<std::string_view> split_tabs(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

bool skippable(std::string_view line) {
  const auto t = utf8::trim(line);
  return t.empty() || t.front() == '#';
}

/// Reads the two-field records of `in`, invoking `sink(line_no, a, b)`.
template <typename Sink>
void read_two_field_lines(std::istream& in, Sink&& sink) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skippable(line)) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw ParseError(line_no, "expected 2 tab-separated fields, found " + std::to_string(fields.size()));
    }
    sink(line_no, fields[0], fields[1]);
  }
}

EntityId parse_id(std::size_t line_no, std::string_view raw) {
  auto id = utf8::trim(raw);
  if (id.empty()) throw ParseError(line_no, "empty entity id");
  return EntityId(std::move(id));
}

}  // namespace

EntityId::EntityId(std::string value) : value_(std::move(value)) {
  if (value_.empty()) throw std::invalid_argument("entity id must not be empty");
  if (utf8::trim(value_) != value_) throw std::invalid_argument("entity id must not carry surrounding whitespace");
}

bool ReferenceSet::add(const EntityId& id, std::string name) {
  if (id.empty()) throw std::invalid_argument("entity id must not be empty");
  if (utf8::trim(name).empty()) throw std::invalid_argument("entity name must not be blank");
  if (name.find_first_of("\t\n") != std::string::npos) throw std::invalid_argument("entity name must not contain tab or newline");
  auto [it, inserted] = by_id_.try_emplace(id.str(), entities_.size());
  if (inserted) entities_.push_back(Entity{id, {}});
  auto& names = entities_[it->second].names;
  if (std::find(names.begin(), names.end(), name) != names.end()) return false;
  name_lookup_[name].push_back(id);
  names.push_back(std::move(name));
  ++name_count_;
  return true;
}

const Entity* ReferenceSet::find(const EntityId& id) const {
  const auto it = by_id_.find(id.str());
  return it == by_id_.end() ? nullptr : &entities_[it->second];
}

const std::vector<EntityId>& ReferenceSet::ids_for_name(std::string_view name) const {
  static const std::vector<EntityId> kNone;
  const auto it = name_lookup_.find(name);
  return it == name_lookup_.end() ? kNone : it->second;
}

bool ReferenceSet::operator==(const ReferenceSet& other) const {
  if (entities_.size() != other.entities_.size()) return false;
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    if (entities_[i].id != other.entities_[i].id || entities_[i].names != other.entities_[i].names) return false;
  }
  return true;
}

ReferenceSet parse_reference_set(std::istream& in) {
  ReferenceSet r;
  read_two_field_lines(in, [&](std::size_t line_no, std::string_view id, std::string_view name) {
    if (utf8::trim(name).empty()) throw ParseError(line_no, "empty name");
    r.add(parse_id(line_no, id), std::string(name));
  });
  if (r.empty()) throw ParseError(0, "reference set is empty");
  return r;
}

std::vector<QueryRecord> parse_query_set(std::istream& in) {
  std::vector<QueryRecord> out;
  read_two_field_lines(in, [&](std::size_t line_no, std::string_view mention, std::string_view id) {
    if (utf8::trim(mention).empty()) throw ParseError(line_no, "empty mention");
    out.push_back(QueryRecord{std::string(mention), parse_id(line_no, id)});
  });
  return out;
}

void write_reference_set(const ReferenceSet& r, std::ostream& out) {
  for (const auto& e : r.entities()) {
    for (const auto& n : e.names) out << e.id.str() << '\t' << n << '\n';
  }
}

ReferenceStats reference_stats(const ReferenceSet& r) {
  ReferenceStats s;
  s.entities = r.size();
  for (const auto& e : r.entities()) {
    s.name_pairs += e.names.size();
    ++s.names_per_entity[e.names.size()];
  }
  return s;
}

}  // namespace nseen
