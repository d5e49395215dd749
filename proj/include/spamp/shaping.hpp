#pragma once

// Stateless gradient shaping operators.
//
// Every operator takes a dense Eigen column vector expression and returns a new
// vector of the same scalar type; inputs are never modified. Threshold-style
// operators take the "leave unchanged" branch for a zero vector, so only
// normalize() can reject a zero gradient.

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "spamp/error.hpp"

namespace spamp {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// One layer's gradient with its identity attached.
template <typename Scalar>
struct BasicGradientVector {
  std::string layer_id;
  Vector<Scalar> components;
};
using GradientVector = BasicGradientVector<double>;

/// Positive bound on a gradient norm.
template <typename Scalar>
class BasicClipThreshold {
 public:
  explicit BasicClipThreshold(Scalar value) : value_(value) {
    if (!(value > Scalar(0)) || !std::isfinite(value)) {
      throw InvalidParameter("clip threshold must be positive and finite");
    }
  }
  Scalar value() const { return value_; }

 private:
  Scalar value_;
};
using ClipThreshold = BasicClipThreshold<double>;

/// Positive bound on the per-step parameter change eta * ||g||.
template <typename Scalar>
class BasicUpdateBound {
 public:
  explicit BasicUpdateBound(Scalar value) : value_(value) {
    if (!(value > Scalar(0)) || !std::isfinite(value)) {
      throw InvalidParameter("update bound must be positive and finite");
    }
  }
  Scalar value() const { return value_; }

 private:
  Scalar value_;
};
using UpdateBound = BasicUpdateBound<double>;

namespace detail {

template <typename Derived>
void require_valid_gradient(const Eigen::MatrixBase<Derived>& g) {
  static_assert(Derived::ColsAtCompileTime == 1, "gradients are column vectors");
  if (g.size() == 0) {
    throw InvalidInput("gradient has no components");
  }
  if (!g.allFinite()) {
    throw InvalidInput("gradient has a non-finite component");
  }
}

template <typename Scalar>
void require_positive(Scalar value, const char* what) {
  if (!(value > Scalar(0)) || !std::isfinite(value)) {
    throw InvalidParameter(std::string(what) + " must be positive and finite");
  }
}

// Scale by bound/norm when norm exceeds bound. Shared by every norm-capping rule.
template <typename Derived>
Vector<typename Derived::Scalar> cap_norm(const Eigen::MatrixBase<Derived>& g,
                                          typename Derived::Scalar norm,
                                          typename Derived::Scalar bound) {
  if (norm <= bound) {
    return g;
  }
  return (bound / norm) * g;
}

}  // namespace detail

template <typename Derived>
typename Derived::Scalar l2_norm(const Eigen::MatrixBase<Derived>& g) {
  detail::require_valid_gradient(g);
  return g.norm();
}

/// Rescales g to norm tau when ||g|| > tau; identity otherwise.
template <typename Derived>
Vector<typename Derived::Scalar> hard_clip(
    const Eigen::MatrixBase<Derived>& g,
    const BasicClipThreshold<typename Derived::Scalar>& tau) {
  return detail::cap_norm(g, l2_norm(g), tau.value());
}

/// Unit-norm direction of g. Throws DegenerateInput for the zero vector.
template <typename Derived>
Vector<typename Derived::Scalar> normalize(const Eigen::MatrixBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm = l2_norm(g);
  if (norm == Scalar(0)) {
    throw DegenerateInput("cannot normalize a zero gradient");
  }
  return g / norm;
}

/// Component-wise sign(g_i) * |g_i|^alpha.
///
/// alpha < 1 compresses components above one and amplifies those below one;
/// callers that need a norm guarantee project afterwards.
template <typename Derived>
Vector<typename Derived::Scalar> power_shape(const Eigen::MatrixBase<Derived>& g,
                                             typename Derived::Scalar alpha) {
  using Scalar = typename Derived::Scalar;
  detail::require_valid_gradient(g);
  detail::require_positive(alpha, "shaping exponent");
  if (alpha == Scalar(1)) {
    return g;
  }
  return g.unaryExpr([alpha](Scalar x) {
    if (x == Scalar(0)) {
      return Scalar(0);
    }
    const Scalar magnitude = std::pow(std::abs(x), alpha);
    return x < Scalar(0) ? -magnitude : magnitude;
  });
}

/// (sum_i |g_i|^(2 alpha))^(1/2), the norm power_shape(g, alpha) would have.
template <typename Derived>
typename Derived::Scalar shaped_norm(const Eigen::MatrixBase<Derived>& g,
                                     typename Derived::Scalar alpha) {
  using Scalar = typename Derived::Scalar;
  detail::require_valid_gradient(g);
  detail::require_positive(alpha, "shaping exponent");
  if (alpha == Scalar(1)) {
    return g.norm();
  }
  return g.unaryExpr([alpha](Scalar x) {
            return x == Scalar(0) ? Scalar(0) : std::pow(std::abs(x), alpha);
          })
      .norm();
}

/// Enforces eta * ||result|| <= delta.
template <typename Derived>
Vector<typename Derived::Scalar> update_clip(
    const Eigen::MatrixBase<Derived>& g, typename Derived::Scalar eta,
    const BasicUpdateBound<typename Derived::Scalar>& delta) {
  detail::require_positive(eta, "learning rate");
  const auto norm = l2_norm(g);
  if (eta * norm <= delta.value()) {
    return g;
  }
  return (delta.value() / (eta * norm)) * g;
}

/// Final projection of a shaped gradient onto the ball of radius tau.
/// Same contract as hard_clip; named separately because it runs after shaping.
template <typename Derived>
Vector<typename Derived::Scalar> project_to_norm(
    const Eigen::MatrixBase<Derived>& g,
    const BasicClipThreshold<typename Derived::Scalar>& tau) {
  return detail::cap_norm(g, l2_norm(g), tau.value());
}

template <typename Derived>
Vector<typename Derived::Scalar> warmup_scale(const Eigen::MatrixBase<Derived>& g,
                                              typename Derived::Scalar eta_t) {
  detail::require_valid_gradient(g);
  detail::require_positive(eta_t, "warmup scale");
  return eta_t * g;
}

}  // namespace spamp
