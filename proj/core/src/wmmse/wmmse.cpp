#include "caac/wmmse/wmmse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace caac::wmmse {

using numkit::Complex;

namespace {

// Power of the update as a function of mu, evaluated in the eigenbasis of A:
// P(mu) = sum_i ||c_i||^2 / (lambda_i + mu)^2 with c = U^H B.
class PowerCurve {
 public:
  PowerCurve(const ComplexMat& a, const ComplexMat& b) : solver_(a) {
    if (solver_.info() != Eigen::Success) {
      throw numkit::NumericalError("WmmsePrecode: eigendecomposition failed");
    }
    lambda_ = solver_.eigenvalues().cwiseMax(0.0);
    coeff_ = solver_.eigenvectors().adjoint() * b;
    energy_ = coeff_.rowwise().squaredNorm();
    const double lmax = lambda_.size() > 0 ? lambda_.maxCoeff() : 0.0;
    null_floor_ = 1e-12 * std::max(lmax, 1e-300);
  }

  bool IsNull(Eigen::Index i) const { return lambda_(i) <= null_floor_; }

  // Pseudo-inverse power at mu = 0; null-space components of B are rounding noise.
  double AtZero() const {
    double p = 0.0;
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
      if (!IsNull(i)) p += energy_(i) / (lambda_(i) * lambda_(i));
    }
    return p;
  }

  double At(double mu) const {
    return (energy_.array() / (lambda_.array() + mu).square()).sum();
  }

  ComplexMat Precoders(double mu) const {
    RealVec inv(lambda_.size());
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
      inv(i) = (mu == 0.0 && IsNull(i)) ? 0.0 : 1.0 / (lambda_(i) + mu);
    }
    return solver_.eigenvectors() * inv.asDiagonal() * coeff_;
  }

 private:
  Eigen::SelfAdjointEigenSolver<ComplexMat> solver_;
  RealVec lambda_;
  ComplexMat coeff_;
  RealVec energy_;
  double null_floor_ = 0.0;
};

// Returns the smallest mu >= 0 (to bisection accuracy) with P(mu) <= p.
double FindMultiplier(const PowerCurve& curve, double power_w, const WmmseOptions& opt) {
  if (curve.AtZero() <= power_w) return 0.0;
  double hi = 1.0;
  double p_hi = curve.At(hi);
  for (int doublings = 0; p_hi >= power_w; ++doublings) {
    if (doublings > 2000) throw numkit::NumericalError("WmmsePrecode: multiplier bracket failed");
    hi *= 2.0;
    const double next = curve.At(hi);
    if (next > p_hi) throw numkit::NumericalError("WmmsePrecode: power not monotone in mu");
    p_hi = next;
  }
  double lo = 0.0;
  for (int step = 0; step < opt.max_bisection_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double p_mid = curve.At(mid);
    if (p_mid > power_w) {
      lo = mid;
    } else {
      hi = mid;
      p_hi = p_mid;
    }
    if (power_w - p_hi <= opt.power_tolerance * power_w) break;
  }
  return hi;
}

}  // namespace

ComplexMat MrtPrecoders(const ComplexMat& channel, double power_w) {
  const Eigen::Index k_users = channel.rows();
  ComplexMat v = ComplexMat::Zero(channel.cols(), k_users);
  const double per_user = std::sqrt(power_w / static_cast<double>(k_users));
  for (Eigen::Index k = 0; k < k_users; ++k) {
    const double norm = channel.row(k).norm();
    if (norm > 0.0) v.col(k) = per_user * channel.row(k).adjoint() / norm;
  }
  return v;
}

RealVec Sinr(const ComplexMat& channel, const ComplexMat& precoders, double noise_power) {
  const ComplexMat g = channel * precoders;  // g(k, m) = h_k v_m
  const Eigen::Index k_users = channel.rows();
  RealVec sinr(k_users);
  for (Eigen::Index k = 0; k < k_users; ++k) {
    const double signal = std::norm(g(k, k));
    const double total = g.row(k).squaredNorm();
    sinr(k) = signal / (total - signal + noise_power);
  }
  return sinr;
}

RealVec Rates(const ComplexMat& channel, const ComplexMat& precoders, double noise_power,
              double bandwidth_hz) {
  return bandwidth_hz * Sinr(channel, precoders, noise_power).unaryExpr([](double s) {
    return std::log2(1.0 + s);
  });
}

double WeightedSumRate(const RealVec& weights, const RealVec& sinr) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < sinr.size(); ++k) total += weights(k) * std::log2(1.0 + sinr(k));
  return total;
}

PrecoderSet WmmsePrecode(const ComplexMat& channel, const RealVec& weights, double power_w,
                         double noise_power, const WmmseOptions& options) {
  const Eigen::Index k_users = channel.rows();
  if (weights.size() != k_users) throw std::invalid_argument("WmmsePrecode: weight length");
  if (!(power_w > 0.0)) throw std::invalid_argument("WmmsePrecode: power must be > 0");
  if (!(weights.array() > 0.0).all()) throw std::invalid_argument("WmmsePrecode: weights must be > 0");
  if (!(noise_power > 0.0)) throw std::invalid_argument("WmmsePrecode: noise power must be > 0");
  if (!channel.allFinite() || !weights.allFinite()) {
    throw numkit::NumericalError("WmmsePrecode: non-finite input");
  }

  PrecoderSet out;
  out.precoders = MrtPrecoders(channel, power_w);
  double wsr = WeightedSumRate(weights, Sinr(channel, out.precoders, noise_power));
  out.wsr_trace.push_back(wsr);
  out.mse_weights = RealVec::Ones(k_users);

  for (int it = 0; it < options.max_iterations; ++it) {
    const ComplexMat g = channel * out.precoders;
    Eigen::VectorXcd u(k_users);
    RealVec w(k_users);
    for (Eigen::Index k = 0; k < k_users; ++k) {
      const double total = g.row(k).squaredNorm() + noise_power;
      u(k) = g(k, k) / total;
      // 1 / (1 - u^* h v) = total / (interference + noise) = 1 + SINR.
      w(k) = total / (total - std::norm(g(k, k)));
    }
    const RealVec a_diag = weights.cwiseProduct(w).cwiseProduct(u.cwiseAbs2());
    const ComplexMat a = channel.adjoint() * a_diag.asDiagonal() * channel;
    const Eigen::VectorXcd b_diag = weights.cwiseProduct(w).cast<Complex>().cwiseProduct(u);
    const ComplexMat b = channel.adjoint() * b_diag.asDiagonal();

    const PowerCurve curve(a, b);
    const double mu = FindMultiplier(curve, power_w, options);
    ComplexMat v;
    if (mu > 0.0) {
      try {
        v = numkit::HermitianSolve(a, mu, b);
      } catch (const numkit::NumericalError&) {
        v = curve.Precoders(mu);
      }
    } else {
      v = curve.Precoders(0.0);
    }
    if (!v.allFinite()) throw numkit::NumericalError("WmmsePrecode: non-finite precoder");

    out.precoders = std::move(v);
    out.mu = mu;
    out.mse_weights = w;
    out.iterations = it + 1;
    const double next = WeightedSumRate(weights, Sinr(channel, out.precoders, noise_power));
    out.wsr_trace.push_back(next);
    const double change = std::fabs(next - wsr);
    wsr = next;
    if (change < options.tolerance * std::max(std::fabs(wsr), 1e-300)) break;
  }
  out.total_power = out.precoders.squaredNorm();
  return out;
}

}  // namespace caac::wmmse
