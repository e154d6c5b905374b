#pragma once

#include <array>
#include <string>
#include <vector>

namespace rhflow {

/// Psi(r, t) = eta(r) * zeta(t).  eta is 1 on [0, rho/2], the bump
/// exp(1 - 1/(1 - s^2)) with s = (2r - rho)/rho on (rho/2, rho), and 0 beyond;
/// zeta = (t/tau)^2 up to tau and 1 after.
class CutoffFunction {
 public:
  CutoffFunction(double rho, double tau, double T);

  double rho() const { return rho_; }
  double tau() const { return tau_; }
  double T() const { return T_; }

  double eta(double r) const;
  double eta_r(double r) const;
  /// One-sided (from the right) at r = rho/2, where the profile is only C^1.
  double eta_rr(double r) const;
  double zeta(double t) const;
  double zeta_t(double t) const;

  double operator()(double r, double t) const { return eta(r) * zeta(t); }
  double d_r(double r, double t) const { return eta_r(r) * zeta(t); }
  double d_rr(double r, double t) const { return eta_rr(r) * zeta(t); }
  double d_t(double r, double t) const { return eta(r) * zeta_t(t); }

 private:
  double rho_, tau_, T_;
};

CutoffFunction cutoff_build(double rho, double tau, double T);

inline constexpr std::array<double, 3> kCutoffExponents = {0.25, 0.5, 0.75};

struct CutoffReport {
  double rho = 0.0, tau = 0.0, T = 0.0;
  int samples_r = 0, samples_t = 0;
  double r_max = 0.0;  // lattice covers r in [0, r_max]

  bool support = false;       // Psi = 0 for r >= rho, 0 <= Psi <= 1
  bool plateau = false;       // Psi = 1 on [0, rho/2] x [tau, T], Psi_r = 0 on [0, rho/2] x [0, T]
  bool initial_zero = false;  // Psi(r, 0) = 0
  bool monotone = false;      // Psi_r <= 0
  double C_bar = 0.0;         // smallest constant for |Psi_t| <= C_bar Psi^{1/2} / tau
  std::array<double, 3> C_a{};  // smallest constants for the radial bounds, per exponent
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
};

/// Samples the lattice [0, 1.25 rho] x [0, T] and derives the constants
/// from the analytic derivatives.
CutoffReport cutoff_verify(const CutoffFunction& c, int samples_r = 512, int samples_t = 512);

}  // namespace rhflow
