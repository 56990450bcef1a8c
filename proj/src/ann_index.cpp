/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <span>
#include <stdexcept>

#include "nseen/binary_io.hpp"
#include "nseen/error.hpp"

namespace nseen {

VectorStore::VectorStore(std::size_t dimension) : dim_(dimension) {
  if (dimension == 0) throw std::invalid_argument("vector dimension must be positive");
}

std::size_t VectorStore::add(EntityId entity_id, std::string name, const Eigen::Ref<const Eigen::VectorXd>& vector) {
  if (dim_ == 0) throw std::logic_error("vector store has no dimension");
  if (static_cast<std::size_t>(vector.size()) != dim_) {
    throw CompatibilityError("vector of dimension " + std::to_string(vector.size()) + " added to a store of dimension " +
                             std::to_string(dim_));
  }
  if (!vector.allFinite()) throw NumericError("non-finite vector for '" + name + "'");
  const double norm = vector.norm();
  if (norm == 0.0) throw NumericError("zero vector for '" + name + "'");
  return add_unit(std::move(entity_id), std::move(name), vector / norm);
}

std::size_t VectorStore::add_unit(EntityId entity_id, std::string name,
                                  const Eigen::Ref<const Eigen::VectorXd>& vector) {
  if (static_cast<std::size_t>(vector.size()) != dim_) throw CompatibilityError("vector dimension mismatch");
  if (!vector.allFinite() || std::abs(vector.norm() - 1.0) > 1e-9) {
    throw NumericError("vector for '" + name + "' is not unit length");
  }
  const std::size_t row = names_.size();
  data_.resize(data_.size() + dim_);
  Eigen::Map<Eigen::VectorXd>(data_.data() + row * dim_, Eigen::Index(dim_)) = vector;
  ids_.push_back(std::move(entity_id));
  names_.push_back(std::move(name));
  return row;
}

Eigen::Map<const Eigen::VectorXd> VectorStore::vector(std::size_t row) const {
  if (row >= size()) throw std::out_of_range("row id out of range");
  return {data_.data() + row * dim_, Eigen::Index(dim_)};
}

namespace {

constexpr int kSplitRetries = 3;

std::uint64_t tree_seed(std::uint64_t master, std::size_t tree) {
  // splitmix64 of (master, tree)
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (tree + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class TreeBuilder {
 public:
  TreeBuilder(const VectorStore& store, std::size_t max_leaf, std::uint64_t seed)
      : store_(store), max_leaf_(max_leaf), rng_(seed) {}

  RpTree build() {
    std::vector<std::uint32_t> rows(store_.size());
    for (std::uint32_t i = 0; i < rows.size(); ++i) rows[i] = i;
    tree_.nodes.emplace_back();
    grow(0, std::move(rows));
    return std::move(tree_);
  }

 private:
  void make_leaf(std::size_t node, const std::vector<std::uint32_t>& rows) {
    auto& n = tree_.nodes[node];
    n.kind = RpTree::Kind::leaf;
    n.left = static_cast<std::uint32_t>(tree_.leaf_rows.size());
    n.right = static_cast<std::uint32_t>(rows.size());
    tree_.leaf_rows.insert(tree_.leaf_rows.end(), rows.begin(), rows.end());
  }

  void grow(std::size_t node, std::vector<std::uint32_t> rows) {
    if (rows.size() <= max_leaf_) {
      make_leaf(node, rows);
      return;
    }
    const auto dim = Eigen::Index(store_.dimension());
    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    Eigen::VectorXd normal(dim);
    double offset = 0.0;
    bool ok = false;
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_other(0, rows.size() - 2);
    for (int attempt = 0; attempt <= kSplitRetries && !ok; ++attempt) {
      const std::size_t a = pick(rng_);
      std::size_t b = pick_other(rng_);
      if (b >= a) ++b;
      const auto va = store_.vector(rows[a]);
      const auto vb = store_.vector(rows[b]);
      normal = va - vb;
      const double len = normal.norm();
      if (len == 0.0) continue;
      normal /= len;
      offset = normal.dot(0.5 * (va + vb));
      left.clear();
      right.clear();
      for (auto r : rows) (normal.dot(store_.vector(r)) - offset > 0.0 ? left : right).push_back(r);
      ok = !left.empty() && !right.empty();
    }

    auto& n = tree_.nodes[node];
    if (ok) {
      n.kind = RpTree::Kind::split;
      n.offset = offset;
      n.normal = static_cast<std::uint32_t>(tree_.normals.size() / std::size_t(dim));
      tree_.normals.insert(tree_.normals.end(), normal.data(), normal.data() + dim);
    } else {
      n.kind = RpTree::Kind::halves;
      const auto mid = rows.begin() + std::ptrdiff_t(rows.size() / 2);
      left.assign(rows.begin(), mid);
      right.assign(mid, rows.end());
    }
    rows.clear();
    rows.shrink_to_fit();

    const auto l = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const auto r = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[node].left = l;
    tree_.nodes[node].right = r;
    grow(l, std::move(left));
    grow(r, std::move(right));
  }

  const VectorStore& store_;
  std::size_t max_leaf_;
  std::mt19937_64 rng_;
  RpTree tree_;
};

void check_query(const VectorStore& store, const Eigen::Ref<const Eigen::VectorXd>& q, std::size_t k) {
  if (store.empty()) throw std::invalid_argument("query against an empty store");
  if (static_cast<std::size_t>(q.size()) != store.dimension()) {
    throw CompatibilityError("query of dimension " + std::to_string(q.size()) + " against an index of dimension " +
                             std::to_string(store.dimension()));
  }
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (!q.allFinite() || q.squaredNorm() == 0.0) throw NumericError("query vector must be finite and nonzero");
}

/// Exact distances for `rows`, sorted, truncated to k.
std::vector<Neighbor> rank(const VectorStore& store, const Eigen::VectorXd& unit_q,
                           const std::vector<std::uint32_t>& rows, std::size_t k) {
  std::vector<std::pair<double, std::uint32_t>> scored;
  scored.reserve(rows.size());
  for (auto r : rows) {
    const double d = std::clamp(1.0 - store.vector(r).dot(unit_q), 0.0, 2.0);
    scored.emplace_back(d, r);
  }
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + std::ptrdiff_t(n), scored.end());
  std::vector<Neighbor> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = scored[i].second;
    out.push_back(Neighbor{row, store.entity_id(row), store.name(row), scored[i].first});
  }
  return out;
}

}  // namespace

RpForest build_index(const VectorStore& store, std::size_t n_trees, std::size_t max_leaf_size, std::uint64_t seed) {
  if (store.empty()) throw std::invalid_argument("cannot index an empty store");
  if (n_trees == 0) throw std::invalid_argument("n_trees must be at least 1");
  if (max_leaf_size == 0) throw std::invalid_argument("max_leaf_size must be at least 1");
  if (store.size() > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("store too large");
  RpForest forest;
  forest.config = ForestConfig{n_trees, max_leaf_size, seed, store.dimension()};
  forest.trees.reserve(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    forest.trees.push_back(TreeBuilder(store, max_leaf_size, tree_seed(seed, t)).build());
  }
  return forest;
}

std::vector<Neighbor> query(const RpForest& forest, const VectorStore& store,
                            const Eigen::Ref<const Eigen::VectorXd>& q, std::size_t k, std::size_t search_budget) {
  check_query(store, q, k);
  if (forest.config.dimension != store.dimension()) throw CompatibilityError("forest and store dimensions differ");
  const Eigen::VectorXd unit_q = q / q.norm();
  const auto dim = Eigen::Index(store.dimension());

  struct Entry {
    double priority;
    std::uint32_t tree;
    std::uint32_t node;
    bool operator<(const Entry& o) const {
      if (priority != o.priority) return priority < o.priority;
      if (tree != o.tree) return tree > o.tree;
      return node > o.node;
    }
  };
  std::priority_queue<Entry> heap;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (std::uint32_t t = 0; t < forest.trees.size(); ++t) heap.push({kInf, t, 0});

  const std::size_t budget = std::max(search_budget, k);  // never fewer candidates than requested
  std::vector<char> seen(store.size(), 0);
  std::vector<std::uint32_t> candidates;
  while (!heap.empty() && candidates.size() < budget) {
    const Entry e = heap.top();
    heap.pop();
    const RpTree& tree = forest.trees[e.tree];
    const RpTree::Node& n = tree.nodes[e.node];
    switch (n.kind) {
      case RpTree::Kind::leaf:
        for (std::uint32_t i = 0; i < n.right; ++i) {
          const auto row = tree.leaf_rows[n.left + i];
          if (!seen[row]) {
            seen[row] = 1;
            candidates.push_back(row);
          }
        }
        break;
      case RpTree::Kind::split: {
        const Eigen::Map<const Eigen::VectorXd> normal(tree.normals.data() + std::size_t(n.normal) * std::size_t(dim),
                                                       dim);
        const double margin = normal.dot(unit_q) - n.offset;
        heap.push({std::min(e.priority, margin), e.tree, n.left});
        heap.push({std::min(e.priority, -margin), e.tree, n.right});
        break;
      }
      case RpTree::Kind::halves:
        heap.push({std::min(e.priority, 0.0), e.tree, n.left});
        heap.push({std::min(e.priority, 0.0), e.tree, n.right});
        break;
    }
  }
  return rank(store, unit_q, candidates, k);
}

std::vector<Neighbor> brute_force_query(const VectorStore& store, const Eigen::Ref<const Eigen::VectorXd>& q,
                                        std::size_t k) {
  check_query(store, q, k);
  const Eigen::VectorXd unit_q = q / q.norm();
  std::vector<std::uint32_t> rows(store.size());
  for (std::uint32_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rank(store, unit_q, rows, k);
}

EmbeddingIndex make_index(VectorStore store, const IndexConfig& config, std::uint32_t model_fingerprint) {
  if (config.search_budget_factor == 0) throw std::invalid_argument("search_budget_factor must be positive");
  EmbeddingIndex index;
  index.forest = build_index(store, config.n_trees, config.max_leaf_size, config.seed);
  index.store = std::move(store);
  index.config = config;
  index.model_fingerprint = model_fingerprint;
  return index;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr std::string_view kIndexMagic = "NSIX";

}  // namespace

std::string serialize_index(const EmbeddingIndex& index) {
  const auto& store = index.store;
  binio::Writer w;
  w.u64(index.config.n_trees);
  w.u64(index.config.max_leaf_size);
  w.u64(index.config.seed);
  w.u64(index.config.search_budget_factor);
  w.u32(index.model_fingerprint);
  w.u64(store.dimension());
  w.u64(store.size());
  for (std::size_t r = 0; r < store.size(); ++r) {
    w.str(store.entity_id(r).str());
    w.str(store.name(r));
    const auto v = store.vector(r);
    w.f64s(std::span<const double>(v.data(), std::size_t(v.size())));
  }
  w.u64(index.forest.trees.size());
  for (const auto& tree : index.forest.trees) {
    w.u64(tree.nodes.size());
    for (const auto& n : tree.nodes) {
      w.u8(static_cast<std::uint8_t>(n.kind));
      w.f64(n.offset);
      w.u32(n.left);
      w.u32(n.right);
      w.u32(n.normal);
    }
    w.u64(tree.normals.size());
    w.f64s(tree.normals);
    w.u64(tree.leaf_rows.size());
    for (auto r : tree.leaf_rows) w.u32(r);
  }
  return binio::frame(kIndexMagic, kIndexFormatVersion, w.bytes());
}

EmbeddingIndex deserialize_index(std::string_view bytes) {
  const auto payload = binio::unframe(bytes, kIndexMagic, kIndexFormatVersion);
  binio::Reader r(payload);
  EmbeddingIndex index;
  index.config.n_trees = r.u64();
  index.config.max_leaf_size = r.u64();
  index.config.seed = r.u64();
  index.config.search_budget_factor = r.u64();
  index.model_fingerprint = r.u32();
  const auto dim = r.u64();
  const auto rows = r.u64();
  if (dim == 0) throw FormatError("index dimension is zero");
  if (rows > r.remaining() / (16 + dim * 8)) throw FormatError("row count larger than payload");
  index.store = VectorStore(dim);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (std::uint64_t i = 0; i < rows; ++i) {
    auto id = r.str();
    auto name = r.str();
    r.f64s(std::span<double>(v.data(), dim));
    try {
      index.store.add_unit(EntityId(std::move(id)), std::move(name), v);
    } catch (const std::exception& e) {
      throw FormatError(std::string("corrupt index row: ") + e.what());
    }
  }
  const auto n_trees = r.u64();
  if (n_trees != index.config.n_trees) throw FormatError("tree count does not match config");
  index.forest.config = ForestConfig{index.config.n_trees, index.config.max_leaf_size, index.config.seed, dim};
  for (std::uint64_t t = 0; t < n_trees; ++t) {
    RpTree tree;
    const auto n_nodes = r.u64();
    if (n_nodes == 0 || n_nodes > r.remaining() / 21) throw FormatError("bad node count");
    tree.nodes.resize(n_nodes);
    for (auto& n : tree.nodes) {
      const auto kind = r.u8();
      if (kind > 2) throw FormatError("bad node kind");
      n.kind = static_cast<RpTree::Kind>(kind);
      n.offset = r.f64();
      n.left = r.u32();
      n.right = r.u32();
      n.normal = r.u32();
    }
    const auto n_normals = r.u64();
    if (n_normals % dim != 0 || n_normals > r.remaining() / 8) throw FormatError("bad normal payload");
    tree.normals.resize(n_normals);
    r.f64s(tree.normals);
    const auto n_leaf = r.u64();
    if (n_leaf > r.remaining() / 4) throw FormatError("bad leaf payload");
    tree.leaf_rows.resize(n_leaf);
    for (auto& x : tree.leaf_rows) {
      x = r.u32();
      if (x >= rows) throw FormatError("leaf row out of range");
    }
    for (std::uint64_t i = 0; i < n_nodes; ++i) {
      const auto& n = tree.nodes[i];
      const bool bad =
          n.kind == RpTree::Kind::leaf
              ? std::uint64_t(n.left) + n.right > n_leaf
              : n.left >= n_nodes || n.right >= n_nodes || n.left <= i || n.right <= i ||
                    (n.kind == RpTree::Kind::split && (std::uint64_t(n.normal) + 1) * dim > n_normals);
      if (bad) throw FormatError("node reference out of range");
    }
    index.forest.trees.push_back(std::move(tree));
  }
  if (!r.done()) throw FormatError("trailing bytes in index payload");
  return index;
}

void save_index(const EmbeddingIndex& index, std::ostream& out) {
  const auto bytes = serialize_index(index);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed to write index");
}

EmbeddingIndex load_index(std::istream& in) { return deserialize_index(binio::read_all(in)); }

}  // namespace nseen
