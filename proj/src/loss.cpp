/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nseen/error.hpp"

namespace nseen {

double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (u.size() != v.size()) {
    throw CompatibilityError("cosine distance between vectors of size " + std::to_string(u.size()) + " and " +
                             std::to_string(v.size()));
  }
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw NumericError("cosine distance of a zero vector");
  const double cos = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return 1.0 - cos;
}

double contrastive_loss(double delta, double y, double margin) {
  if (!(y >= 0.0 && y <= 1.0)) throw std::invalid_argument("label must lie in [0, 1]");
  if (!(margin > 0.0)) throw std::invalid_argument("margin must be positive");
  const double push = std::max(0.0, margin - delta);
  return 0.5 * y * delta * delta + 0.5 * (1.0 - y) * push * push;
}

double contrastive_loss_slope(double delta, double y, double margin) {
  return y * delta - (1.0 - y) * std::max(0.0, margin - delta);
}

double optimal_distance(double y) {
  if (!(y >= 0.0 && y <= 1.0)) throw std::invalid_argument("label must lie in [0, 1]");
  return 1.0 - y;
}

}  // namespace nseen
