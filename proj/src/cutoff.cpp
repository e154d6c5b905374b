#include "rhflow/cutoff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rhflow/grid.hpp"

namespace rhflow {

CutoffFunction::CutoffFunction(double rho, double tau, double T) : rho_(rho), tau_(tau), T_(T) {
  if (!(rho > 0.0)) throw Error("cutoff: rho must be > 0");
  if (!(T > 0.0)) throw Error("cutoff: T must be > 0");
  if (!(tau > 0.0) || tau > T) throw Error("cutoff: need 0 < tau <= T");
}

double CutoffFunction::eta(double r) const {
  if (r <= 0.5 * rho_) return 1.0;
  if (r >= rho_) return 0.0;
  const double s = (2.0 * r - rho_) / rho_;
  const double q = 1.0 - s * s;
  return std::exp(1.0 - 1.0 / q);
}

double CutoffFunction::eta_r(double r) const {
  if (r <= 0.5 * rho_ || r >= rho_) return 0.0;
  const double s = (2.0 * r - rho_) / rho_;
  const double q = 1.0 - s * s;
  return eta(r) * (-2.0 * s / (q * q)) * (2.0 / rho_);
}

double CutoffFunction::eta_rr(double r) const {
  if (r < 0.5 * rho_ || r >= rho_) return 0.0;
  const double s = (2.0 * r - rho_) / rho_;
  const double q = 1.0 - s * s;
  const double d2 = 4.0 * s * s / (q * q * q * q) - 2.0 / (q * q) - 8.0 * s * s / (q * q * q);
  return eta(r) * d2 * (4.0 / (rho_ * rho_));
}

double CutoffFunction::zeta(double t) const {
  if (t >= tau_) return 1.0;
  const double x = t / tau_;
  return x * x;
}

double CutoffFunction::zeta_t(double t) const {
  if (t >= tau_) return 0.0;
  return 2.0 * t / (tau_ * tau_);
}

CutoffFunction cutoff_build(double rho, double tau, double T) { return CutoffFunction(rho, tau, T); }

CutoffReport cutoff_verify(const CutoffFunction& c, int samples_r, int samples_t) {
  if (samples_r < 2 || samples_t < 2) throw Error("cutoff_verify: need at least 2 samples per axis");
  CutoffReport rep;
  rep.rho = c.rho();
  rep.tau = c.tau();
  rep.T = c.T();
  rep.samples_r = samples_r;
  rep.samples_t = samples_t;
  rep.r_max = 1.25 * c.rho();
  bool support = true, plateau = true, initial = true, monotone = true, finite = true;
  const double rho = c.rho(), tau = c.tau();

  for (int i = 0; i < samples_r; ++i) {
    const double r = rep.r_max * i / (samples_r - 1);
    for (int j = 0; j < samples_t; ++j) {
      const double t = c.T() * j / (samples_t - 1);
      const double psi = c(r, t);
      const double pr = c.d_r(r, t), prr = c.d_rr(r, t), pt = c.d_t(r, t);
      if (!std::isfinite(psi) || !std::isfinite(pr) || !std::isfinite(prr) || !std::isfinite(pt)) {
        finite = false;
        continue;
      }
      if (psi < 0.0 || psi > 1.0) support = false;
      if (r >= rho && (psi != 0.0 || pr != 0.0 || prr != 0.0 || pt != 0.0)) support = false;
      if (r <= 0.5 * rho && pr != 0.0) plateau = false;
      if (r <= 0.5 * rho && t >= tau && psi != 1.0) plateau = false;
      if (j == 0 && psi != 0.0) initial = false;
      if (pr > 0.0) monotone = false;

      if (psi > 0.0) {
        rep.C_bar = std::max(rep.C_bar, std::abs(pt) * tau / std::sqrt(psi));
        for (std::size_t k = 0; k < kCutoffExponents.size(); ++k) {
          const double pa = std::pow(psi, kCutoffExponents[k]);
          const double need = std::max(std::abs(pr) * rho / pa, std::abs(prr) * rho * rho / pa);
          rep.C_a[k] = std::max(rep.C_a[k], need);
        }
      } else if (pt != 0.0 || pr != 0.0 || prr != 0.0) {
        // A derivative where Psi vanishes cannot be bounded by a power of Psi.
        finite = false;
      }
    }
  }
  rep.support = support;
  rep.plateau = plateau;
  rep.initial_zero = initial;
  rep.monotone = monotone;
  if (!support) rep.failures.push_back("support/range property violated");
  if (!plateau) rep.failures.push_back("plateau property violated");
  if (!initial) rep.failures.push_back("Psi(r, 0) != 0");
  if (!monotone) rep.failures.push_back("Psi_r > 0 somewhere");
  if (!finite) rep.failures.push_back("non-finite value or unbounded derivative ratio");
  if (!std::isfinite(rep.C_bar)) rep.failures.push_back("C_bar not finite");
  for (std::size_t k = 0; k < kCutoffExponents.size(); ++k) {
    if (!std::isfinite(rep.C_a[k])) {
      std::ostringstream os;
      os << "C_a not finite for a = " << kCutoffExponents[k];
      rep.failures.push_back(os.str());
    }
  }
  return rep;
}

}  // namespace rhflow
