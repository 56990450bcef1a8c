/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <Eigen/Core>

namespace nseen {

using Embedding = Eigen::VectorXd;

/// 1 - u.v / (|u| |v|), in [0, 2]. Throws NumericError on a zero vector or
/// a dimension mismatch (CompatibilityError).
double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v);

/// Soft-label contrastive loss:
///   y * d^2 / 2 + (1 - y) * max(0, m - d)^2 / 2
double contrastive_loss(double delta, double y, double margin);

/// dL/d(delta) of contrastive_loss.
double contrastive_loss_slope(double delta, double y, double margin);

/// Distance minimizing the unit-margin loss for label y: 1 - y.
double optimal_distance(double y);

}  // namespace nseen
