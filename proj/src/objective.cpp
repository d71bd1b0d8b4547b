#include "unisafe/objective.hpp"

#include <cmath>
#include <sstream>

#include "unisafe/errors.hpp"

namespace unisafe {

WeightVector::WeightVector(Vec w) : w_(std::move(w)) {
  if (w_.size() < 1) throw ContractError("WeightVector: empty");
  for (Eigen::Index i = 0; i < w_.size(); ++i) {
    if (!std::isfinite(w_(i)) || !(w_(i) > 0.0)) {
      throw ContractError("WeightVector: weight " + std::to_string(i) + " is not positive");
    }
  }
}

ObjectiveView ObjectiveView::weighted(const ConstraintParams& p, const WeightVector& w) {
  if (w.values().size() != p.num_constraints()) {
    throw ContractError("weighted objective: expected " + std::to_string(p.num_constraints()) +
                        " weights, got " + std::to_string(w.values().size()));
  }
  return {&p, 1.0, &w};
}

namespace {

void check_interior(const Vec& d) {
  Eigen::Index worst = 0;
  const double top = d.maxCoeff(&worst);
  if (!(top < kBoundaryMargin)) {
    std::ostringstream msg;
    msg << "objective evaluated outside K_p: margin " << worst << " = " << top;
    throw DomainError(msg.str());
  }
}

}  // namespace

ObjectiveEval evaluate(const ObjectiveView& obj, const Eigen::Ref<const Vec>& k, EvalOrder order) {
  const ConstraintParams& p = *obj.params;
  const int n = p.num_constraints();
  const int m = p.input_dim();
  ObjectiveEval out;
  out.margins = margins(p, k);
  check_interior(out.margins);

  const double r = obj.r;
  const double k2 = k.squaredNorm();
  const Vec b2 = p.b().rowwise().squaredNorm();
  const bool want_grad = order != EvalOrder::Value;
  const bool want_hess = order == EvalOrder::Hessian;
  if (want_grad) out.gradient = Vec::Zero(m);
  if (want_hess) out.hessian = Mat::Zero(m, m);

  for (int i = 0; i < n; ++i) {
    const double w = obj.weights ? obj.weights->values()(i) : 1.0;
    const double d = out.margins(i);
    const double numer = b2(i) + r * k2;
    out.value -= w * numer / (2.0 * d);
    if (!want_grad) continue;
    const auto bi = p.b().row(i).transpose();
    out.gradient += w * (-r / d * k + numer / (2.0 * d * d) * bi);
    if (!want_hess) continue;
    // -Gamma_i / d^3 with Gamma_i = r d^2 I - r d (k b^T + b k^T) + (||b||^2 + r||k||^2) b b^T
    const double d3 = d * d * d;
    Mat gamma = -r * d * (k * bi.transpose() + bi * k.transpose()) + numer * bi * bi.transpose();
    gamma.diagonal().array() += r * d * d;
    out.hessian -= (w / d3) * gamma;
  }
  return out;
}

std::optional<double> try_value(const ObjectiveView& obj, const Eigen::Ref<const Vec>& k) {
  const Vec d = margins(*obj.params, k);
  if (!(d.maxCoeff() < kBoundaryMargin)) return std::nullopt;
  return evaluate(obj, k, EvalOrder::Value).value;
}

double eval_J(const ConstraintParams& p, const Eigen::Ref<const Vec>& k) {
  return evaluate(ObjectiveView::plain(p), k, EvalOrder::Value).value;
}

double eval_J_scaled(const ScaledParams& q, const Eigen::Ref<const Vec>& k) {
  return evaluate(ObjectiveView::scaled(q), k, EvalOrder::Value).value;
}

double eval_J_weighted(const ConstraintParams& p, const WeightVector& w,
                       const Eigen::Ref<const Vec>& k) {
  return evaluate(ObjectiveView::weighted(p, w), k, EvalOrder::Value).value;
}

Vec grad_J(const ConstraintParams& p, const Eigen::Ref<const Vec>& k) {
  return evaluate(ObjectiveView::plain(p), k, EvalOrder::Gradient).gradient;
}

Vec grad_J(const ScaledParams& q, const Eigen::Ref<const Vec>& k) {
  return evaluate(ObjectiveView::scaled(q), k, EvalOrder::Gradient).gradient;
}

Vec grad_J(const ConstraintParams& p, const WeightVector& w, const Eigen::Ref<const Vec>& k) {
  return evaluate(ObjectiveView::weighted(p, w), k, EvalOrder::Gradient).gradient;
}

Mat hess_J(const ConstraintParams& p, const Eigen::Ref<const Vec>& k) {
  return evaluate(ObjectiveView::plain(p), k, EvalOrder::Hessian).hessian;
}

Mat hess_J(const ScaledParams& q, const Eigen::Ref<const Vec>& k) {
  return evaluate(ObjectiveView::scaled(q), k, EvalOrder::Hessian).hessian;
}

Mat hess_J(const ConstraintParams& p, const WeightVector& w, const Eigen::Ref<const Vec>& k) {
  return evaluate(ObjectiveView::weighted(p, w), k, EvalOrder::Hessian).hessian;
}

}  // namespace unisafe
