#pragma once

#include <optional>
#include <utility>

#include <Eigen/Dense>

namespace unisafe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Coefficients of N strict affine inequalities a_i + b_i^T u < 0 over u in R^m.
///
/// `b()` stores one constraint per row, so margins are simply a + B u. The
/// open polytope of admissible inputs is denoted K_p throughout.
class ConstraintParams {
 public:
  /// Throws ContractError on empty or mismatched shapes and on non-finite entries.
  ConstraintParams(Vec a, Mat b);

  int num_constraints() const { return static_cast<int>(a_.size()); }
  int input_dim() const { return static_cast<int>(b_.cols()); }

  const Vec& a() const { return a_; }
  const Mat& b() const { return b_; }

  /// Largest of |a_i|, ||b_i|| and 1.
  double scale() const;

 private:
  Vec a_;
  Mat b_;
};

/// Point q = (p / M, 1 / M^2) of the bounded training domain.
struct ScaledParams {
  /// Throws ContractError if |a_i| or ||b_i|| exceeds 1 (+1e-12) or r is outside [0, 1].
  ScaledParams(ConstraintParams base, double r);

  ConstraintParams base;
  double r;
};

/// Witness that K_p is nonempty.
struct FeasibilityCertificate {
  Vec interior_point;
  double margin;  // max_i (a_i + b_i^T u0), always < 0
};

enum class FeasibilityStatus { Feasible, Infeasible, Indeterminate };

struct FeasibilityResult {
  FeasibilityStatus status;
  std::optional<FeasibilityCertificate> certificate;  // set iff Feasible
  Vec best_point;                                     // lowest max-margin point visited
  double best_margin;
  int iterations;
};

struct FeasibilityOptions {
  double feas_tol = 1e-9;
  int budget = 3000;  // gradient iterations per smoothing stage
};

/// a + B u, with a ContractError on dimension mismatch.
Vec margins(const ConstraintParams& p, const Eigen::Ref<const Vec>& u);

/// max_i (a_i + b_i^T u).
double max_margin(const ConstraintParams& p, const Eigen::Ref<const Vec>& u);

/// Searches for a strictly interior point of K_p by descending the
/// log-sum-exp smoothing of the max-margin with sharpness 1, 10, 100.
///
/// The certificate is verified with exact margins. When no point with
/// max-margin below -feas_tol is found, the result is Infeasible if the best
/// max-margin exceeds +feas_tol and Indeterminate otherwise.
FeasibilityResult find_interior_point(const ConstraintParams& p,
                                      const FeasibilityOptions& opts = {});

/// Returns q(p) and M. Margin signs are preserved since M > 0.
std::pair<ScaledParams, double> scale_params(const ConstraintParams& p);

/// Flattens q as (a_1..a_N, b_1..b_N, r); width N(m+1)+1.
Vec flatten(const ScaledParams& q);

/// Inverse of flatten(). Does not enforce the scaled-box bounds.
std::pair<ConstraintParams, double> unflatten(const Eigen::Ref<const Vec>& q_flat, int n_constraints,
                                              int input_dim);

}  // namespace unisafe
