#include "doctest.h"
#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include "unisafe/errors.hpp"
#include "unisafe/objective.hpp"

using namespace unisafe;

namespace {
Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}
Mat col(std::initializer_list<double> v) { return vec(v); }

const ConstraintParams kSymmetric(vec({-1, -1}), col({1, -1}));
}  // namespace

TEST_CASE("objective values on hand-computed instances") {
  CHECK(eval_J({vec({-2}), col({0})}, vec({0})) == 0.0);
  CHECK(eval_J({vec({-2}), col({1})}, vec({0})) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(eval_J(kSymmetric, vec({0})) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("scaled objective") {
  Rng rng(1);
  const auto inst = oracle::random_instance(rng, 3, 2);
  const ConstraintParams p = scale_params({inst.a, inst.b}).first.base;
  CHECK(eval_J_scaled(ScaledParams(p, 1.0), inst.interior) == eval_J(p, inst.interior));
  const ScaledParams q0(ConstraintParams(vec({-1}), col({1})), 0.0);
  CHECK(eval_J_scaled(q0, vec({0})) == doctest::Approx(0.5));
}

TEST_CASE("weighted objective is linear in the weights") {
  CHECK(eval_J_weighted(kSymmetric, WeightVector(vec({2, 2})), vec({0})) ==
        doctest::Approx(2.0));
  CHECK(eval_J_weighted({vec({-2}), col({1})}, WeightVector(vec({3})), vec({0})) ==
        doctest::Approx(0.75));
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracle::random_instance(rng, 4, 3);
    const ConstraintParams p(inst.a, inst.b);
    const WeightVector ones(Vec::Ones(4));
    CHECK(eval_J_weighted(p, ones, inst.interior) == doctest::Approx(eval_J(p, inst.interior)));
    CHECK((grad_J(p, ones, inst.interior) - grad_J(p, inst.interior)).norm() <= 1e-12);
    CHECK((hess_J(p, ones, inst.interior) - hess_J(p, inst.interior)).norm() <= 1e-10);
  }
  CHECK_THROWS_AS(WeightVector(vec({1, 0})), ContractError);
  CHECK_THROWS_AS(eval_J_weighted(kSymmetric, WeightVector(vec({1})), vec({0})), ContractError);
}

TEST_CASE("boundary and exterior points are outside the domain") {
  CHECK_THROWS_AS(eval_J({vec({0}), col({1})}, vec({0})), DomainError);
  CHECK_THROWS_AS(eval_J({vec({-1}), col({1})}, vec({2})), DomainError);
  CHECK_THROWS_AS(grad_J({vec({-1}), col({1})}, vec({1})), DomainError);
  CHECK_THROWS_AS(eval_J({vec({-1e-15}), col({1})}, vec({0})), DomainError);
}

TEST_CASE("objective grows toward a facet") {
  const ConstraintParams p(vec({-1, -1}), col({1, -1}));
  CHECK(eval_J(p, vec({1 - 1e-4})) > eval_J(p, vec({1 - 1e-2})));
  CHECK(eval_J(p, vec({-1 + 1e-4})) > eval_J(p, vec({-1 + 1e-2})));
}

TEST_CASE("gradient on hand-computed instances") {
  CHECK(grad_J(kSymmetric, vec({0})).norm() == 0.0);
  CHECK(grad_J({vec({-1}), col({0})}, vec({1}))(0) == doctest::Approx(1.0));
}

TEST_CASE("hessian on hand-computed instances") {
  const Vec k = vec({0.3, -0.7});
  Mat b = Mat::Zero(1, 2);
  const Mat h = hess_J({vec({-1}), b}, k);
  CHECK((h - Mat::Identity(2, 2)).norm() <= 1e-14);
  // J(k) = (1 + k^2) / (1 - k^2) = 1 + 2k^2 + O(k^4)
  CHECK(hess_J(kSymmetric, vec({0}))(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("gradient and hessian match finite differences") {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 5, m = 1 + t % 4;
    const auto inst = oracle::random_instance(rng, n, m);
    const Vec& k = inst.interior;
    Vec a = inst.a;
    Mat b = inst.b;
    double r = 1.0;
    Vec g;
    Mat h;
    if (t % 2 == 0) {
      const ConstraintParams p(a, b);
      g = grad_J(p, k);
      h = hess_J(p, k);
    } else {
      const ScaledParams base = scale_params({a, b}).first;
      r = uniform(rng, 0.05, 1.0);
      const ScaledParams q(base.base, r);
      a = q.base.a();
      b = q.base.b();
      g = grad_J(q, k);
      h = hess_J(q, k);
    }
    auto f = [&](const Vec& x) { return oracle::barrier_sum(a, b, r, x); };
    const Vec fd_g = oracle::fd_gradient(f, k, 1e-6 * (1.0 + k.norm()));
    CHECK((g - fd_g).norm() <= 1e-5 * std::max(1.0, g.norm()));

    const Mat fd_h = oracle::fd_hessian(f, k, 1e-4 * (1.0 + k.norm()));
    CHECK((h - fd_h).norm() <= 1e-4 * std::max(1.0, h.norm()));
    CHECK((h - h.transpose()).norm() <= 1e-12 * std::max(1.0, h.norm()));
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(h).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("fused evaluation agrees with the individual entry points") {
  Rng rng(23);
  const auto inst = oracle::random_instance(rng, 4, 3);
  const ConstraintParams p(inst.a, inst.b);
  const auto e = evaluate(ObjectiveView::plain(p), inst.interior, EvalOrder::Hessian);
  CHECK(e.value == eval_J(p, inst.interior));
  CHECK(e.gradient == grad_J(p, inst.interior));
  CHECK(e.hessian == hess_J(p, inst.interior));
  CHECK(e.margins == margins(p, inst.interior));
  CHECK_FALSE(try_value(ObjectiveView::plain(p), Vec::Constant(3, 1e6)).has_value());
}
