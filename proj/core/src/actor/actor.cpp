#include "caac/actor/actor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "caac/numkit/linalg.hpp"

namespace caac::actor {

namespace {

bool InUnitInterval(double x) { return x > 0.0 && x < 1.0; }

// The surrogates only interact through inner products of their gradients, so
// both dual problems are solved on the (K+1) x (K+1) Gram matrix.
//
// For multipliers m over a subset of the functions (zero elsewhere), the inner
// minimizer is d(m) = -sum_j m_j ghat_j / (2 Z) with Z = sum_j m_j zeta_j, and
//   fbar_k(d) = fhat_k + ghat_k.d + zeta_k ||d||^2.
class GramModel {
 public:
  explicit GramModel(const SurrogateSet& sur)
      : gram_(sur.ghat * sur.ghat.transpose()), fhat_(sur.fhat), zeta_(sur.zeta) {}

  struct Point {
    double z = 0.0;
    double dsq = 0.0;       // ||d||^2
    RealVec g_dot_d;        // ghat_k . d
    RealVec values;         // fbar_k(d), all k
    double dual = 0.0;      // sum_j m_j fbar_j(d)
  };

  Point Evaluate(const RealVec& m) const {
    Point p;
    p.z = zeta_.dot(m);
    const RealVec gm = gram_ * m;
    const double q = m.dot(gm);
    p.g_dot_d = -gm / (2.0 * p.z);
    p.dsq = std::max(q, 0.0) / (4.0 * p.z * p.z);
    p.values = fhat_ + p.g_dot_d + zeta_ * p.dsq;
    p.dual = m.dot(fhat_) - std::max(q, 0.0) / (4.0 * p.z);
    return p;
  }

  // (Psi_k . Psi_j) with Psi_k = ghat_k + 2 zeta_k d.
  RealMat PsiGram(const Point& p) const {
    const Eigen::Index n = fhat_.size();
    RealMat out(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index j = 0; j < n; ++j) {
        out(k, j) = gram_(k, j) + 2.0 * zeta_(j) * p.g_dot_d(k) + 2.0 * zeta_(k) * p.g_dot_d(j) +
                    4.0 * zeta_(k) * zeta_(j) * p.dsq;
      }
    }
    return out;
  }

 private:
  RealMat gram_;
  RealVec fhat_;
  RealVec zeta_;
};

RealVec ThetaFromMultipliers(const SurrogateSet& sur, const RealVec& m) {
  const double z = sur.zeta.dot(m);
  return sur.anchor - sur.ghat.transpose() * m / (2.0 * z);
}

// Euclidean projection onto the probability simplex.
RealVec ProjectSimplex(const RealVec& v) {
  RealVec u = v;
  std::sort(u.data(), u.data() + u.size(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    cumsum += u(i);
    const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
    if (u(i) - t > 0.0) tau = t;
  }
  return (v.array() - tau).cwiseMax(0.0);
}

RealVec WithObjective(const RealVec& lambda) {
  RealVec m(lambda.size() + 1);
  m(0) = 1.0;
  m.tail(lambda.size()) = lambda;
  return m;
}

RealVec WithoutObjective(const RealVec& lambda) {
  RealVec m = RealVec::Zero(lambda.size() + 1);
  m.tail(lambda.size()) = lambda;
  return m;
}

double KktResidual(const RealVec& lambda, const RealVec& grad) {
  double r = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    r = std::max(r, lambda(k) > 0.0 ? std::fabs(grad(k)) : std::max(grad(k), 0.0));
  }
  return r;
}

}  // namespace

void StepSchedule::Validate() const {
  if (!InUnitInterval(kappa1) || !InUnitInterval(kappa2) || !InUnitInterval(kappa3)) {
    throw std::invalid_argument("StepSchedule: kappas must lie in (0,1)");
  }
  if (!(kappa1 < kappa2)) throw std::invalid_argument("StepSchedule: need kappa1 < kappa2");
}

double StepSchedule::Eta(int i) const { return std::pow(i + 1.0, -kappa1); }
double StepSchedule::Mu(int i) const { return std::pow(i + 1.0, -kappa2); }
double StepSchedule::Upsilon(int i) const { return std::pow(i + 1.0, -kappa3); }

SaaEstimate SaaEstimates(const RealMat& costs, const RealMat& q_values,
                         const WeightedScoreFn& weighted_scores) {
  const Eigen::Index b = costs.rows();
  if (b < 1) throw std::invalid_argument("SaaEstimates: empty batch");
  if (q_values.rows() != b || q_values.cols() != costs.cols()) {
    throw std::invalid_argument("SaaEstimates: Q/cost shape mismatch");
  }
  if (!q_values.allFinite()) throw numkit::NumericalError("SaaEstimates: non-finite Q value");
  SaaEstimate out;
  out.f = costs.colwise().mean().transpose();
  out.g = weighted_scores(q_values / static_cast<double>(b));
  if (out.g.rows() != costs.cols() || !out.g.allFinite()) {
    throw numkit::NumericalError("SaaEstimates: non-finite or misshaped score");
  }
  return out;
}

EstimatorState RecursiveUpdate(const EstimatorState& state, const SaaEstimate& sample,
                               double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("RecursiveUpdate: eta in (0,1]");
  EstimatorState out;
  out.iteration = state.iteration + 1;
  if (state.fhat.size() == 0 || eta == 1.0) {
    out.fhat = sample.f;
    out.ghat = sample.g;
    return out;
  }
  out.fhat = (1.0 - eta) * state.fhat + eta * sample.f;
  out.ghat = (1.0 - eta) * state.ghat + eta * sample.g;
  return out;
}

void ClipRows(RealMat& g, double max_norm) {
  for (Eigen::Index k = 0; k < g.rows(); ++k) {
    const double n = g.row(k).norm();
    if (n > max_norm) g.row(k) *= max_norm / n;
  }
}

double SurrogateSet::Value(int k, const RealVec& theta) const {
  const RealVec d = theta - anchor;
  return fhat(k) + ghat.row(k).dot(d) + zeta(k) * d.squaredNorm();
}

void SurrogateSet::Validate() const {
  const Eigen::Index n = fhat.size();
  if (n < 1 || ghat.rows() != n || zeta.size() != n || ghat.cols() != anchor.size()) {
    throw std::invalid_argument("SurrogateSet: inconsistent shapes");
  }
  if (!(zeta.array() > 0.0).all()) throw std::invalid_argument("SurrogateSet: zeta must be > 0");
  if (!fhat.allFinite() || !ghat.allFinite() || !anchor.allFinite()) {
    throw numkit::NumericalError("SurrogateSet: non-finite estimate");
  }
}

FeasibleSolution SolveFeasible(const SurrogateSet& sur, const DualSolveOptions& options) {
  sur.Validate();
  const int k = sur.num_constraints();
  if (k < 1) throw std::invalid_argument("SolveFeasible: need at least one constraint");
  const GramModel model(sur);

  auto dual_of = [&](const RealVec& lam) { return model.Evaluate(WithoutObjective(lam)); };
  auto primal_of = [](const GramModel::Point& p) { return p.values.tail(p.values.size() - 1).maxCoeff(); };

  // Accelerated projected gradient ascent with backtracking and restarts,
  // stopped on the duality gap.
  const int max_iter = std::max(options.max_iterations, 20000);
  RealVec lam = RealVec::Constant(k, 1.0 / k);
  RealVec best = lam;
  GramModel::Point best_pt = dual_of(lam);
  double best_primal = primal_of(best_pt);
  RealVec best_primal_lam = lam;
  RealVec y = lam;
  double t = 1.0;
  double step_l = 1.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    const GramModel::Point py = dual_of(y);
    const RealVec grad = py.values.tail(k);
    RealVec next;
    GramModel::Point pn;
    for (int bt = 0; bt < 100; ++bt) {
      next = ProjectSimplex(y + grad / step_l);
      pn = dual_of(next);
      const RealVec diff = next - y;
      if (pn.dual >= py.dual + grad.dot(diff) - 0.5 * step_l * diff.squaredNorm() - 1e-15 * std::fabs(py.dual)) break;
      step_l *= 2.0;
    }
    if (pn.dual > best_pt.dual) {
      best = next;
      best_pt = pn;
    }
    const double primal = primal_of(pn);
    if (primal < best_primal) {
      best_primal = primal;
      best_primal_lam = next;
    }
    const double gap = best_primal - best_pt.dual;
    if (gap <= 1e-12 * std::max(1.0, std::fabs(best_primal))) break;

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (pn.dual < dual_of(lam).dual) {
      // restart momentum
      y = lam;
      t = 1.0;
      continue;
    }
    y = next + ((t - 1.0) / t_next) * (next - lam);
    lam = next;
    t = t_next;
    step_l *= 0.9;
  }

  FeasibleSolution out;
  out.lambda = best_primal_lam;
  out.theta = ThetaFromMultipliers(sur, WithoutObjective(best_primal_lam));
  out.alpha = best_primal;
  out.lower_bound = best_pt.dual;
  out.iterations = it;
  return out;
}

ObjectiveSolution SolveObjective(const SurrogateSet& sur, const RealVec& warm_lambda,
                                 const DualSolveOptions& options) {
  sur.Validate();
  const int k = sur.num_constraints();
  ObjectiveSolution out;
  if (k == 0) {
    out.feasible = true;
    out.lambda = RealVec(0);
    out.theta = sur.anchor - sur.ghat.row(0).transpose() / (2.0 * sur.zeta(0));
    return out;
  }

  out.feasibility = SolveFeasible(sur, options);
  if (out.feasibility.lower_bound > 0.0) {
    out.feasible = false;
    out.theta = out.feasibility.theta;
    out.lambda = RealVec::Zero(k);
    out.max_constraint = out.feasibility.alpha;
    return out;
  }
  out.feasible = true;

  const GramModel model(sur);
  RealVec lam = (warm_lambda.size() == k && (warm_lambda.array() >= 0.0).all() &&
                 warm_lambda.allFinite())
                    ? warm_lambda
                    : RealVec::Zero(k);
  GramModel::Point pt = model.Evaluate(WithObjective(lam));
  RealVec grad = pt.values.tail(k);
  double residual = KktResidual(lam, grad);
  int it = 0;
  for (; it < options.max_iterations && residual > options.kkt_tolerance; ++it) {
    // Two-metric projected Newton: Newton step on the free multipliers,
    // gradient step on those pinned at zero with an outward gradient.
    const double eps = std::min(1e-8, residual);
    std::vector<int> free_set;
    std::vector<int> active;
    for (int j = 0; j < k; ++j) {
      if (lam(j) <= eps && grad(j) < 0.0) {
        active.push_back(j);
      } else {
        free_set.push_back(j);
      }
    }
    RealVec dir = RealVec::Zero(k);
    for (int j : active) dir(j) = grad(j);
    if (!free_set.empty()) {
      const RealMat psi = model.PsiGram(pt).bottomRightCorner(k, k);
      const auto nf = static_cast<Eigen::Index>(free_set.size());
      RealMat h(nf, nf);
      RealVec g(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        g(a) = grad(free_set[a]);
        for (Eigen::Index b = 0; b < nf; ++b) h(a, b) = psi(free_set[a], free_set[b]) / (2.0 * pt.z);
      }
      const double reg = 1e-10 * std::max(h.diagonal().maxCoeff(), 1e-300) + 1e-300;
      h.diagonal().array() += reg;
      const RealVec step = h.ldlt().solve(g);
      for (Eigen::Index a = 0; a < nf; ++a) dir(free_set[a]) = step(a);
    }
    if (!dir.allFinite()) dir = grad;

    bool accepted = false;
    double s = 1.0;
    for (int bt = 0; bt < 80; ++bt, s *= 0.5) {
      const RealVec cand = (lam + s * dir).cwiseMax(0.0);
      const GramModel::Point pc = model.Evaluate(WithObjective(cand));
      if (pc.dual >= pt.dual + 1e-4 * grad.dot(cand - lam)) {
        lam = cand;
        pt = pc;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // fall back to a plain projected gradient step
      const RealVec cand = (lam + 1e-6 * grad).cwiseMax(0.0);
      const GramModel::Point pc = model.Evaluate(WithObjective(cand));
      if (!(pc.dual > pt.dual)) break;
      lam = cand;
      pt = pc;
    }
    grad = pt.values.tail(k);
    residual = KktResidual(lam, grad);
  }
  if (!lam.allFinite()) throw numkit::NumericalError("SolveObjective: dual diverged");

  out.lambda = lam;
  out.iterations = it;
  out.kkt_residual = residual;
  out.theta = ThetaFromMultipliers(sur, WithObjective(lam));
  out.max_constraint = pt.values.tail(k).maxCoeff();
  if (out.max_constraint > options.kkt_tolerance &&
      out.feasibility.alpha < out.max_constraint) {
    // Dual not resolved (e.g. a feasible set with empty interior): take the
    // least-violating point.
    out.theta = out.feasibility.theta;
    out.max_constraint = out.feasibility.alpha;
  }
  return out;
}

RealVec Blend(const RealVec& theta, const RealVec& theta_bar, double mu) {
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("Blend: mu must lie in (0,1]");
  if (mu == 1.0) return theta_bar;
  return (1.0 - mu) * theta + mu * theta_bar;
}

}  // namespace caac::actor
