#include "spamp/adaptive.hpp"

#include <algorithm>
#include <cmath>

#include "spamp/error.hpp"
#include "spamp/shaping.hpp"

namespace spamp {

namespace {

void require_beta(double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw InvalidParameter("EMA beta must lie in [0, 1)");
  }
}

}  // namespace

EmaTracker::EmaTracker(double beta) : beta_(beta) { require_beta(beta); }

EmaTracker EmaTracker::seeded(double beta, double value) {
  if (!std::isfinite(value)) {
    throw InvalidInput("EMA seed value must be finite");
  }
  EmaTracker tracker(beta);
  tracker.value_ = value;
  tracker.initialized_ = true;
  return tracker;
}

double EmaTracker::value() const {
  if (!initialized_) {
    throw InvalidState("EMA tracker read before its first observation");
  }
  return value_;
}

EmaTracker ema_update(const EmaTracker& tracker, double x) {
  if (!std::isfinite(x)) {
    throw InvalidInput("EMA observation must be finite");
  }
  EmaTracker next = tracker;
  if (!tracker.initialized_) {
    next.value_ = x;
    next.initialized_ = true;
  } else {
    next.value_ = tracker.beta_ * tracker.value_ + (1.0 - tracker.beta_) * x;
  }
  return next;
}

void validate(const SpampParams& params) {
  require_beta(params.beta);
  if (!(params.alpha_min > 0.0) || !(params.alpha_min <= params.alpha_max) ||
      !std::isfinite(params.alpha_max)) {
    throw InvalidParameter("shaping exponents need 0 < alpha_min <= alpha_max");
  }
  if (!(params.kappa >= 0.0) || !std::isfinite(params.kappa)) {
    throw InvalidParameter("kappa must be non-negative and finite");
  }
}

LayerShaperState make_layer_state(std::string layer_id, const SpampParams& params) {
  validate(params);
  return LayerShaperState{std::move(layer_id), EmaTracker(params.beta), params.alpha_min,
                          params.alpha_max,   params.kappa,           0,
                          params.argument};
}

double dynamic_alpha(double ratio, const LayerShaperState& state) {
  if (!(ratio >= 0.0)) {
    throw InvalidInput("norm ratio must be non-negative");
  }
  const double excess = std::max(0.0, ratio - 1.0);
  // inf * 0 would be NaN; an infinite ratio always saturates at alpha_min.
  if (std::isinf(excess)) {
    return state.kappa > 0.0 ? state.alpha_min : state.alpha_max;
  }
  return std::clamp(state.alpha_max - state.kappa * excess, state.alpha_min, state.alpha_max);
}

SpampStepResult spamp_layer_step(const LayerShaperState& state,
                                 const Eigen::Ref<const Eigen::VectorXd>& g, double eta) {
  detail::require_positive(eta, "learning rate");
  const double raw_norm = l2_norm(g);

  LayerShaperState next = state;
  next.tau = ema_update(state.tau, raw_norm);
  const double tau = next.tau.value();
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw InvalidState("layer threshold is negative or non-finite");
  }
  // tau == 0 only after an all-zero stream, in which case g is zero too.
  if (tau == 0.0 && raw_norm > 0.0) {
    throw InvalidState("layer threshold collapsed to zero under a nonzero gradient");
  }

  double argument = 0.0;
  if (raw_norm > 0.0) {
    argument = state.argument == ExponentArgument::kNormRatio ? raw_norm / tau : raw_norm;
  }
  const double alpha = dynamic_alpha(argument, next);

  SpampStepResult result{power_shape(g, alpha), std::move(next), {}};
  const double pre_norm = result.shaped.norm();
  const bool projected = pre_norm > tau;
  if (projected) {
    result.shaped = project_to_norm(result.shaped, ClipThreshold(tau));
  }
  result.state.step_count += 1;
  result.diagnostics = SpampDiagnostics{raw_norm,  tau, alpha, pre_norm,
                                        projected, eta * result.shaped.norm()};
  return result;
}

UpdateBudgetTracker::UpdateBudgetTracker(double beta, double epsilon_in)
    : ema(beta), epsilon(epsilon_in) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidParameter("update bound epsilon must be positive");
  }
}

DeltaUpdate delta_update(const UpdateBudgetTracker& tracker, double eta, double grad_norm) {
  detail::require_positive(eta, "learning rate");
  if (!(grad_norm >= 0.0) || !std::isfinite(grad_norm)) {
    throw InvalidInput("gradient norm must be non-negative and finite");
  }
  UpdateBudgetTracker next = tracker;
  next.ema = ema_update(tracker.ema, eta * grad_norm);
  return DeltaUpdate{next.ema.value() + next.epsilon, next};
}

NormHistory::NormHistory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) {
    throw InvalidParameter("norm history capacity must be positive");
  }
  ring_.reserve(std::min<std::size_t>(capacity, 4096));
}

void NormHistory::push(double norm) {
  if (!(norm >= 0.0) || !std::isfinite(norm)) {
    throw InvalidInput("norm samples must be non-negative and finite");
  }
  if (ring_.size() < capacity_) {
    ring_.push_back(norm);
    return;
  }
  ring_[head_] = norm;
  head_ = (head_ + 1) % capacity_;
}

std::vector<double> NormHistory::samples() const {
  std::vector<double> out;
  out.reserve(ring_.size());
  out.insert(out.end(), ring_.begin() + static_cast<std::ptrdiff_t>(head_), ring_.end());
  out.insert(out.end(), ring_.begin(), ring_.begin() + static_cast<std::ptrdiff_t>(head_));
  return out;
}

double quantile_threshold(const NormHistory& history, double q) {
  if (history.empty()) {
    throw EmptyInput("quantile of an empty norm history");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InvalidParameter("quantile level must lie in [0, 1]");
  }
  std::vector<double> sorted = history.samples();
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // Shave rounding noise so that e.g. 0.7 * 10 selects rank 7, not 8.
  const double rank = std::ceil(q * n - 1e-9);
  const double index = std::clamp(rank - 1.0, 0.0, n - 1.0);
  return sorted[static_cast<std::size_t>(index)];
}

}  // namespace spamp
