/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nseen {

/// Canonical identifier of a reference entity. Never empty, never padded
/// with whitespace.
class EntityId {
 public:
  EntityId() = default;  // empty placeholder; not a valid id
  explicit EntityId(std::string value);

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  auto operator<=>(const EntityId&) const = default;

 private:
  std::string value_;
};

struct Entity {
  EntityId id;
  std::vector<std::string> names;  // unique, insertion order
};

/// Immutable-after-build collection of entities plus a name → ids lookup.
/// A name may belong to several entities.
class ReferenceSet {
 public:
  /// Adds `name` under `id`, creating the entity on first sight. Returns
  /// false when the (id, name) pair was already present.
  bool add(const EntityId& id, std::string name);

  const std::vector<Entity>& entities() const noexcept { return entities_; }
  std::size_t size() const noexcept { return entities_.size(); }
  bool empty() const noexcept { return entities_.empty(); }

  const Entity* find(const EntityId& id) const;
  bool contains(const EntityId& id) const { return find(id) != nullptr; }

  /// Entities carrying `name`, in insertion order; empty when unknown.
  const std::vector<EntityId>& ids_for_name(std::string_view name) const;
  const std::map<std::string, std::vector<EntityId>, std::less<>>& name_lookup() const noexcept {
    return name_lookup_;
  }

  /// Total number of (id, name) pairs.
  std::size_t name_count() const noexcept { return name_count_; }

  bool operator==(const ReferenceSet& other) const;

 private:
  std::vector<Entity> entities_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<std::string, std::vector<EntityId>, std::less<>> name_lookup_;
  std::size_t name_count_ = 0;
};

struct QueryRecord {
  std::string mention;
  EntityId gold_id;

  bool operator==(const QueryRecord&) const = default;
};

struct ReferenceStats {
  std::size_t entities = 0;
  std::size_t name_pairs = 0;
  std::map<std::size_t, std::size_t> names_per_entity;  // name count -> entities

  bool operator==(const ReferenceStats&) const = default;
};

/// Reads `id<TAB>name` lines. `#` comment lines and blank lines are
/// skipped; duplicate pairs collapse. Throws ParseError on a malformed line
/// or when no entity is found.
ReferenceSet parse_reference_set(std::istream& in);

/// Reads `mention<TAB>gold_id` lines in file order, duplicates kept.
std::vector<QueryRecord> parse_query_set(std::istream& in);

void write_reference_set(const ReferenceSet& r, std::ostream& out);

ReferenceStats reference_stats(const ReferenceSet& r);

}  // namespace nseen
