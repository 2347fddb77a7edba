#pragma once

#include "qrproxy/model.hpp"

namespace qrproxy {

/// rho_p(u) = u (p - 1{u < 0}).
inline double check_loss(double u, double p) { return u * (u < 0.0 ? p - 1.0 : p); }

/// n log p + n log(1 - p) - sum rho_p(y_i - ghat_i).
double qr_loglik(const Vec& y, const Vec& ghat, double p);

/// Constants of the exponential scale mixture of normals that represents the
/// asymmetric Laplace likelihood: y | s ~ N(mu + A s, B s / delta2) with
/// s ~ Exp(rate delta2).
struct AldMixture {
  double A;
  double B;
};

AldMixture ald_mixture_params(double p);

/// Asymmetric Laplace density p (1 - p) delta2 exp(-delta2 rho_p(r)).
double ald_density(double r, double p, double delta2 = 1.0);

/// log N(r | A s, B s / delta2).
double ald_conditional_logdensity(double r, double s, double delta2, const AldMixture& m);

}  // namespace qrproxy
