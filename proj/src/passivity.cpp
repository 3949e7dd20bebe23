#include "gridpass/passivity.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "gridpass/errors.hpp"

namespace gridpass {

namespace {

using CMat = Eigen::MatrixXcd;

// Diagonal similarity that evens out row and column norms of A.
StateSpaceModel balanced(const StateSpaceModel& m) {
  const Eigen::Index n = m.A.rows();
  Vec d = Vec::Ones(n);
  Mat A = m.A;
  for (int sweep = 0; sweep < 50; ++sweep) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0, r = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(A(j, i));
        r += std::abs(A(i, j));
      }
      if (c == 0 || r == 0) continue;
      double f = 1.0;
      const double s = c + r;
      while (c < r / 2) { c *= 2; r /= 2; f *= 2; }
      while (c >= r * 2) { c /= 2; r *= 2; f /= 2; }
      if (c + r < 0.95 * s) {
        changed = true;
        d[i] *= f;
        A.col(i) *= f;
        A.row(i) /= f;
      }
    }
    if (!changed) break;
  }
  StateSpaceModel out;
  out.A = A;
  out.B = d.cwiseInverse().asDiagonal() * m.B;
  out.C = m.C * d.asDiagonal();
  out.labels = m.labels;
  return out;
}

std::string eigen_listing(const StateSpaceModel& m) {
  std::ostringstream os;
  auto ev = m.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) os << (i ? ", " : "") << ev[i];
  return os.str();
}

}  // namespace

double sigma_max_at(const StateSpaceModel& m, double omega) {
  const Eigen::Index n = m.A.rows();
  CMat M = -m.A.cast<std::complex<double>>();
  M.diagonal().array() += std::complex<double>(0.0, omega);
  CMat G = m.C.cast<std::complex<double>>() * M.partialPivLu().solve(m.B.cast<std::complex<double>>());
  (void)n;
  Eigen::JacobiSVD<CMat> svd(G);
  return svd.singularValues()(0);
}

bool hamiltonian_has_imaginary_eigenvalues(const StateSpaceModel& m, double gamma, std::vector<double>* omegas) {
  const Eigen::Index n = m.A.rows();
  Mat H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = m.A;
  H.topRightCorner(n, n) = (m.B * m.B.transpose()) / gamma;
  H.bottomLeftCorner(n, n) = -(m.C.transpose() * m.C) / gamma;
  H.bottomRightCorner(n, n) = -m.A.transpose();
  Eigen::EigenSolver<Mat> es(H, false);
  const auto ev = es.eigenvalues();
  const double scale = H.lpNorm<Eigen::Infinity>();
  bool any = false;
  if (omegas) omegas->clear();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double re = ev[i].real(), im = ev[i].imag();
    if (im < 0) continue;
    if (std::abs(re) <= 1e-9 * std::max(1.0, std::abs(ev[i])) + 1e-13 * scale) {
      any = true;
      if (omegas) omegas->push_back(im);
    }
  }
  if (omegas) std::sort(omegas->begin(), omegas->end());
  return any;
}

L2GainResult l2_gain_sweep(const StateSpaceModel& model, double w0, double w1, int points) {
  model.validate();
  L2GainResult r;
  r.method = "sweep";
  // Modal form makes each frequency O(n p m); fall back to a dense solve when
  // the eigenvector basis is ill-conditioned.
  Eigen::EigenSolver<Mat> es(model.A);
  const CMat V = es.eigenvectors();
  const CMat Vi = V.inverse();
  const bool modal = es.info() == Eigen::Success && Vi.allFinite() && V.norm() * Vi.norm() < 1e8;
  const CMat CV = model.C.cast<std::complex<double>>() * V;
  const CMat ViB = Vi * model.B.cast<std::complex<double>>();
  const Eigen::VectorXcd lam = es.eigenvalues();
  CMat G(model.C.rows(), model.B.cols());
  auto at = [&](double w) {
    if (!modal) return sigma_max_at(model, w);
    G.setZero();
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      G.noalias() += (CV.col(i) / (std::complex<double>(0.0, w) - lam[i])) * ViB.row(i);
    if (G.rows() == 1 || G.cols() == 1) return G.norm();
    // largest eigenvalue of the smaller Gram matrix is cheaper than an SVD
    const CMat gram = G.rows() <= G.cols() ? CMat(G * G.adjoint()) : CMat(G.adjoint() * G);
    return std::sqrt(Eigen::SelfAdjointEigenSolver<CMat>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff());
  };
  const double l0 = std::log10(w0), l1 = std::log10(w1);
  for (int k = 0; k < points; ++k) {
    const double w = std::pow(10.0, l0 + (l1 - l0) * k / std::max(1, points - 1));
    const double s = at(w);
    if (s > r.gamma) {
      r.gamma = s;
      r.omega_peak = w;
    }
  }
  const double s0 = sigma_max_at(model, 0.0);
  if (s0 >= r.gamma) {
    r.gamma = s0;
    r.omega_peak = 0.0;
  }
  return r;
}

L2GainResult l2_gain(const StateSpaceModel& model, double tol) {
  model.validate();
  if (model.A.rows() == 0) fail(ErrorKind::InvalidArgument, "l2_gain: empty model");
  if (!(tol > 0 && tol < 0.1)) fail(ErrorKind::InvalidArgument, "l2_gain: tolerance must lie in (0, 0.1)");
  if (!model.is_hurwitz())
    fail(ErrorKind::NotHurwitz, "l2_gain: state matrix is not Hurwitz; eigenvalues: " + eigen_listing(model));

  const StateSpaceModel m = balanced(model);
  L2GainResult r;
  r.method = "hamiltonian-bisection";

  // Lower bound from zero frequency, the pole frequencies and a coarse sweep.
  auto consider = [&](double w) {
    if (!(w >= 0) || !std::isfinite(w)) return;
    const double s = sigma_max_at(m, w);
    if (s > r.gamma) {
      r.gamma = s;
      r.omega_peak = w;
    }
  };
  consider(0.0);
  const auto poles = m.eigenvalues();
  double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
  for (Eigen::Index i = 0; i < poles.size(); ++i) {
    consider(std::abs(poles[i].imag()));
    consider(std::abs(poles[i]));
    wmin = std::min(wmin, std::abs(poles[i]));
    wmax = std::max(wmax, std::abs(poles[i]));
  }
  wmin = std::max(wmin * 1e-2, 1e-8);
  wmax = wmax * 1e2;
  for (int k = 0; k < 200; ++k) consider(wmin * std::pow(wmax / wmin, k / 199.0));

  if (r.gamma == 0.0) {
    r.certified_above = true;
    return r;
  }

  std::vector<double> omegas;
  for (r.iterations = 1; r.iterations <= 200; ++r.iterations) {
    const double level = r.gamma * (1.0 + 2.0 * tol);
    if (!hamiltonian_has_imaginary_eigenvalues(m, level, &omegas)) break;
    const double before = r.gamma;
    if (omegas.size() == 1) consider(omegas[0]);
    for (size_t k = 0; k + 1 < omegas.size(); ++k) consider(0.5 * (omegas[k] + omegas[k + 1]));
    // Crossings that do not lift the lower bound are numerical artefacts of
    // nearly-imaginary eigenvalues; the bound is already tight.
    if (r.gamma <= before * (1.0 + tol)) break;
    if (r.iterations == 200)
      fail(ErrorKind::NoConvergence, "l2_gain: Hamiltonian iteration exceeded its cap");
  }

  // Polish the peak location with a golden-section search around it.
  if (r.omega_peak > 0) {
    double a = r.omega_peak * 0.98, b = r.omega_peak * 1.02;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int k = 0; k < 60; ++k) {
      const double c = b - g * (b - a), d = a + g * (b - a);
      if (sigma_max_at(m, c) > sigma_max_at(m, d)) b = d; else a = c;
    }
    consider(0.5 * (a + b));
  }

  r.certified_above = !hamiltonian_has_imaginary_eigenvalues(m, r.gamma * (1.0 + tol));
  r.certified_below = r.omega_peak == 0.0 ? sigma_max_at(m, 0.0) >= r.gamma * (1.0 - tol)
                                          : hamiltonian_has_imaginary_eigenvalues(m, r.gamma * (1.0 - tol));
  return r;
}

double pei_sigma(double alpha, double beta, double kappa) { return 0.5 * (1.0 / beta + alpha / kappa); }

PeiVerdict verify_pei(double gamma, double alpha, double beta, double kappa) {
  PeiVerdict v;
  if (!(beta >= kappa * gamma)) v.violated.push_back("beta >= kappa*gamma");
  if (!(kappa * gamma > 0)) v.violated.push_back("kappa*gamma > 0");
  if (!(kappa > alpha * beta)) v.violated.push_back("kappa > alpha*beta");
  if (!(alpha * beta > 0)) v.violated.push_back("alpha*beta > 0");
  v.valid = v.violated.empty();
  if (v.valid) v.sigma = pei_sigma(alpha, beta, kappa);
  return v;
}

PeiConfig design_pei(double gamma, const PeiPolicy& pol) {
  if (!(gamma > 0) || !std::isfinite(gamma)) fail(ErrorKind::InvalidArgument, "design_pei: gamma must be positive");
  if (!(pol.kappa > 0 && pol.kappa <= 1)) fail(ErrorKind::InfeasiblePolicy, "design_pei: kappa must lie in (0, 1]");
  if (!(pol.margin >= 0)) fail(ErrorKind::InfeasiblePolicy, "design_pei: margin must be non-negative");
  if (!(pol.alpha_fraction > 0 && pol.alpha_fraction <= 1))
    fail(ErrorKind::InfeasiblePolicy, "design_pei: alpha_fraction must lie in (0, 1]");
  const double m = pol.margin;
  PeiConfig c;
  c.kappa = pol.kappa;
  c.gamma_design = gamma;
  c.beta = pol.kappa * gamma * (1.0 + m);
  if (pol.sigma_target) {
    // sigma = (1 + f/(1+m)) / (2 beta) once alpha is tied to beta
    const double k = 1.0 + pol.alpha_fraction / (1.0 + m);
    const double best = k / (2.0 * c.beta);
    if (!(*pol.sigma_target > 0) || *pol.sigma_target > best) {
      std::ostringstream os;
      os << "design_pei: sigma target " << *pol.sigma_target << " exceeds the reachable " << best
         << " for gamma " << gamma << " and kappa " << pol.kappa;
      fail(ErrorKind::InfeasiblePolicy, os.str());
    }
    c.beta = k / (2.0 * *pol.sigma_target);
  }
  c.alpha = pol.alpha_fraction * pol.kappa / (c.beta * (1.0 + m));
  // with no margin the product lands on the boundary; step inside it
  while (!(c.kappa > c.alpha * c.beta)) c.alpha = std::nextafter(c.alpha, 0.0);
  c.sigma = pei_sigma(c.alpha, c.beta, c.kappa);
  return c;
}

std::vector<double> ofp_residual(const std::vector<Vec>& u, const std::vector<Vec>& y, double sigma, double dt) {
  if (u.size() != y.size()) fail(ErrorKind::LengthMismatch, "ofp_residual: input and output series differ in length");
  std::vector<double> r(u.size(), 0.0);
  double prev = 0.0, acc = 0.0;
  for (size_t k = 0; k < u.size(); ++k) {
    if (u[k].size() != y[k].size()) fail(ErrorKind::LengthMismatch, "ofp_residual: sample dimensions differ");
    const double f = u[k].dot(y[k]) - sigma * y[k].squaredNorm();
    if (k > 0) acc += 0.5 * dt * (prev + f);
    r[k] = acc;
    prev = f;
  }
  return r;
}

}  // namespace gridpass
