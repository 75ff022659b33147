#pragma once

#include <functional>

#include "caac/numkit/linalg.hpp"

namespace caac::actor {

using numkit::RealMat;
using numkit::RealVec;

// eta_i = (i+1)^-kappa1 (estimates), mu_i = (i+1)^-kappa2 (policy blend),
// upsilon_i = (i+1)^-kappa3 (critic).
struct StepSchedule {
  double kappa1 = 0.6;
  double kappa2 = 0.7;
  double kappa3 = 0.3;

  // Throws std::invalid_argument unless all kappas lie in (0,1) and kappa1 < kappa2.
  void Validate() const;
  double Eta(int i) const;
  double Mu(int i) const;
  double Upsilon(int i) const;
};

// Recursive estimates of the objective/constraint values and gradients.
struct EstimatorState {
  RealVec fhat;  // K+1
  RealMat ghat;  // (K+1) x D
  int iteration = 0;
};

struct SaaEstimate {
  RealVec f;  // K+1
  RealMat g;  // (K+1) x D
};

// Given a B x (K+1) weight matrix W, returns the (K+1) x D matrix whose row j
// is sum_t W(t, j) * grad log pi(a_t|s_t).
using WeightedScoreFn = std::function<RealMat(const RealMat&)>;

// f_k = mean_t C'_k(t); g_k = mean_t Q_k(s_t,a_t) grad log pi(a_t|s_t).
SaaEstimate SaaEstimates(const RealMat& costs, const RealMat& q_values,
                         const WeightedScoreFn& weighted_scores);

// fhat <- (1-eta) fhat + eta f; same for ghat. Advances the iteration index.
EstimatorState RecursiveUpdate(const EstimatorState& state, const SaaEstimate& sample, double eta);

// Rescales every row of `g` whose norm exceeds `max_norm` to that norm.
void ClipRows(RealMat& g, double max_norm);

// Convex quadratic models fbar_k(theta) = fhat_k + ghat_k.(theta - anchor)
// + zeta_k ||theta - anchor||^2, k = 0 (objective) .. K (constraints).
struct SurrogateSet {
  RealVec anchor;  // theta_i
  RealVec fhat;    // K+1
  RealMat ghat;    // (K+1) x D
  RealVec zeta;    // K+1, all > 0

  int num_constraints() const { return static_cast<int>(fhat.size()) - 1; }
  double Value(int k, const RealVec& theta) const;
  void Validate() const;
};

struct DualSolveOptions {
  int max_iterations = 500;
  double kkt_tolerance = 1e-6;
};

// min_theta max_k>=1 fbar_k(theta), solved through its dual over the simplex.
struct FeasibleSolution {
  RealVec theta;
  double alpha = 0.0;        // max_k fbar_k(theta), an upper bound on the min-max value
  double lower_bound = 0.0;  // dual value, a lower bound on the min-max value
  RealVec lambda;       // simplex multipliers, length K
  int iterations = 0;
};
FeasibleSolution SolveFeasible(const SurrogateSet& sur, const DualSolveOptions& options = {});

// min fbar_0 s.t. fbar_k <= 0, solved by projected Newton ascent on the
// concave dual over lambda >= 0. `feasible` is false when the feasibility
// problem has a positive optimal value; `theta` then holds the feasible-update
// minimizer instead.
struct ObjectiveSolution {
  bool feasible = false;
  RealVec theta;
  RealVec lambda;        // length K
  double kkt_residual = 0.0;
  double max_constraint = 0.0;  // max_k fbar_k(theta)
  int iterations = 0;
  FeasibleSolution feasibility;
};
ObjectiveSolution SolveObjective(const SurrogateSet& sur, const RealVec& warm_lambda = {},
                                 const DualSolveOptions& options = {});

// theta_{i+1} = (1 - mu) theta_i + mu thetabar.
RealVec Blend(const RealVec& theta, const RealVec& theta_bar, double mu);

}  // namespace caac::actor
