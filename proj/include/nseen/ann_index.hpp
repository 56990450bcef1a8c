/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nseen/loss.hpp"
#include "nseen/refset.hpp"

namespace nseen {

/// Row-addressed embedding storage. Vectors are unit-normalized on
/// insertion; row ids are dense and follow insertion order.
class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(std::size_t dimension);

  /// Appends a row and returns its id. Throws CompatibilityError on a
  /// dimension mismatch and NumericError on a zero or non-finite vector.
  std::size_t add(EntityId entity_id, std::string name, const Eigen::Ref<const Eigen::VectorXd>& vector);

  /// Appends a vector that is already unit length, bit for bit. Used when
  /// reloading a persisted store.
  std::size_t add_unit(EntityId entity_id, std::string name, const Eigen::Ref<const Eigen::VectorXd>& vector);

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  std::size_t dimension() const noexcept { return dim_; }

  const EntityId& entity_id(std::size_t row) const { return ids_.at(row); }
  const std::string& name(std::size_t row) const { return names_.at(row); }
  /// The stored (unit) vector of a row.
  Eigen::Map<const Eigen::VectorXd> vector(std::size_t row) const;

  bool operator==(const VectorStore&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<EntityId> ids_;
  std::vector<std::string> names_;
  std::vector<double, Eigen::aligned_allocator<double>> data_;  // row-major, dim_ per row
};

struct Neighbor {
  std::size_t row_id = 0;
  EntityId entity_id;
  std::string name;
  double distance = 0.0;  // exact cosine distance

  bool operator==(const Neighbor&) const = default;
};

/// One random-projection tree. Internal nodes split on a hyperplane
/// `normal . x = offset`; rows with a positive margin go left.
struct RpTree {
  enum class Kind : std::uint8_t { leaf = 0, split = 1, halves = 2 };

  struct Node {
    Kind kind = Kind::leaf;
    double offset = 0.0;
    std::uint32_t left = 0;   // child node, or first leaf row for leaves
    std::uint32_t right = 0;  // child node, or leaf row count for leaves
    std::uint32_t normal = 0;  // index into normals (split nodes)

    bool operator==(const Node&) const = default;
  };

  std::vector<Node> nodes;  // nodes[0] is the root
  std::vector<double> normals;  // dimension values per split node
  std::vector<std::uint32_t> leaf_rows;

  bool operator==(const RpTree&) const = default;
};

struct ForestConfig {
  std::size_t n_trees = 50;
  std::size_t max_leaf_size = 16;
  std::uint64_t seed = 0;
  std::size_t dimension = 0;

  bool operator==(const ForestConfig&) const = default;
};

struct RpForest {
  ForestConfig config;
  std::vector<RpTree> trees;

  bool operator==(const RpForest&) const = default;
};

/// Recursively splits the store on random-pair difference hyperplanes
/// through the midpoint of the pair. Nodes above max_leaf_size rows split;
/// a split that leaves one side empty is retried with a fresh pair up to
/// three times, then falls back to halving by row order.
RpForest build_index(const VectorStore& store, std::size_t n_trees, std::size_t max_leaf_size,
                     std::uint64_t seed);

/// Best-first traversal of all trees with one shared priority queue until
/// max(search_budget, k) distinct candidates are collected, then an exact cosine
/// re-rank. Results ascend by distance, ties by row id.
std::vector<Neighbor> query(const RpForest& forest, const VectorStore& store,
                            const Eigen::Ref<const Eigen::VectorXd>& q, std::size_t k, std::size_t search_budget);

/// Exact linear scan with the same ordering contract as query().
std::vector<Neighbor> brute_force_query(const VectorStore& store, const Eigen::Ref<const Eigen::VectorXd>& q,
                                        std::size_t k);

struct IndexConfig {
  std::size_t n_trees = 50;
  std::size_t max_leaf_size = 16;
  std::uint64_t seed = 0;
  /// Candidate budget per requested neighbor.
  std::size_t search_budget_factor = 50;

  bool operator==(const IndexConfig&) const = default;
};

/// Stored reference embeddings, their forest, and the fingerprint of the
/// model that produced them.
struct EmbeddingIndex {
  VectorStore store;
  RpForest forest;
  IndexConfig config;
  std::uint32_t model_fingerprint = 0;

  std::size_t dimension() const noexcept { return store.dimension(); }
  std::size_t search_budget(std::size_t k) const noexcept { return k * config.search_budget_factor; }

  std::vector<Neighbor> nearest(const Eigen::Ref<const Eigen::VectorXd>& q, std::size_t k) const {
    return query(forest, store, q, k, search_budget(k));
  }

  bool operator==(const EmbeddingIndex&) const = default;
};

EmbeddingIndex make_index(VectorStore store, const IndexConfig& config, std::uint32_t model_fingerprint = 0);

inline constexpr std::uint32_t kIndexFormatVersion = 1;

/// `NSIX` framed, little-endian, checksummed.
void save_index(const EmbeddingIndex& index, std::ostream& out);
EmbeddingIndex load_index(std::istream& in);
std::string serialize_index(const EmbeddingIndex& index);
EmbeddingIndex deserialize_index(std::string_view bytes);

}  // namespace nseen
