#pragma once

#include <optional>

#include "unisafe/params.hpp"

namespace unisafe {

/// Positive per-constraint weights of the weighted objective.
class WeightVector {
 public:
  /// Throws ContractError unless every entry is finite and > 0.
  explicit WeightVector(Vec w);
  const Vec& values() const { return w_; }

 private:
  Vec w_;
};

/// Margins at or above this value count as the boundary of K_p.
inline constexpr double kBoundaryMargin = -1e-14;

/// The barrier-like objective
///
///   J(k) = -sum_i w_i (||b_i||^2 + r ||k||^2) / (2 (a_i + b_i^T k))
///
/// with r = 1 and w = 1 for the plain form, r from q for the scaled form.
/// The view does not own its parameters.
struct ObjectiveView {
  const ConstraintParams* params;
  double r = 1.0;
  const WeightVector* weights = nullptr;

  static ObjectiveView plain(const ConstraintParams& p) { return {&p, 1.0, nullptr}; }
  static ObjectiveView scaled(const ScaledParams& q) { return {&q.base, q.r, nullptr}; }
  static ObjectiveView weighted(const ConstraintParams& p, const WeightVector& w);
};

enum class EvalOrder { Value = 0, Gradient = 1, Hessian = 2 };

/// Value, gradient and Hessian sharing one margin computation.
struct ObjectiveEval {
  double value = 0.0;
  Vec gradient;  // empty below EvalOrder::Gradient
  Mat hessian;   // empty below EvalOrder::Hessian
  Vec margins;
};

/// Throws DomainError when any margin is >= kBoundaryMargin.
ObjectiveEval evaluate(const ObjectiveView& obj, const Eigen::Ref<const Vec>& k, EvalOrder order);

/// Like evaluate() at EvalOrder::Value, returning nullopt instead of throwing outside K_p.
std::optional<double> try_value(const ObjectiveView& obj, const Eigen::Ref<const Vec>& k);

double eval_J(const ConstraintParams& p, const Eigen::Ref<const Vec>& k);
double eval_J_scaled(const ScaledParams& q, const Eigen::Ref<const Vec>& k);
double eval_J_weighted(const ConstraintParams& p, const WeightVector& w,
                       const Eigen::Ref<const Vec>& k);

Vec grad_J(const ConstraintParams& p, const Eigen::Ref<const Vec>& k);
Vec grad_J(const ScaledParams& q, const Eigen::Ref<const Vec>& k);
Vec grad_J(const ConstraintParams& p, const WeightVector& w, const Eigen::Ref<const Vec>& k);

Mat hess_J(const ConstraintParams& p, const Eigen::Ref<const Vec>& k);
Mat hess_J(const ScaledParams& q, const Eigen::Ref<const Vec>& k);
Mat hess_J(const ConstraintParams& p, const WeightVector& w, const Eigen::Ref<const Vec>& k);

}  // namespace unisafe
