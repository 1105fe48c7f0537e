#pragma once

// Geometric programs in standard form, solved in log variables y = ln x:
//
//   minimize    prod_i f_i(x)        (f_i posynomials; a single factor is the usual GP)
//   subject to  g_j(x) <= 1          (posynomials)
//               m_q(x)  = 1          (monomials)
//
// Under y = ln x every ln f is a log-sum-exp of affine functions, so the
// problem is convex. It is solved with a primal log-barrier method: damped
// Newton centering with equality constraints kept exact through the KKT
// system, a phase-I problem when no strictly feasible start is known, and a
// geometric increase of the barrier weight until the duality-gap bound m/t
// falls below the requested tolerance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcofdma/error.hpp"
#include "mcofdma/gp/posynomial.hpp"

namespace mcofdma::gp {

struct GpProblem {
  std::size_t num_variables = 0;
  std::vector<Posynomial> objective;      // minimize the product of these
  std::vector<Posynomial> inequalities;   // each <= 1
  std::vector<Monomial> equalities;       // each == 1

  /// Log of the objective at x.
  double log_objective(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& f : objective) s += std::log(f.eval(x));
    return s;
  }

  void check() const {
    if (num_variables == 0) throw UsageError("GpProblem: no variables");
    if (objective.empty()) throw UsageError("GpProblem: empty objective");
    auto check_mono = [&](const Monomial& m) {
      if (!(m.coeff > 0.0) || !std::isfinite(m.coeff)) throw UsageError("GpProblem: non-positive coefficient");
      for (const auto& [v, e] : m.exponents) {
        if (v >= num_variables) throw UsageError("GpProblem: undeclared variable " + std::to_string(v));
        if (!std::isfinite(e)) throw UsageError("GpProblem: non-finite exponent");
      }
    };
    for (const auto& f : objective) {
      if (f.empty()) throw UsageError("GpProblem: empty objective factor");
      for (const auto& t : f.terms) check_mono(t);
    }
    for (const auto& g : inequalities) {
      if (g.empty()) throw UsageError("GpProblem: empty constraint");
      for (const auto& t : g.terms) check_mono(t);
    }
    for (const auto& m : equalities) check_mono(m);
  }
};

enum class GpStatus { kOptimal, kMaxIters, kInfeasible };

inline const char* to_string(GpStatus s) {
  switch (s) {
    case GpStatus::kOptimal: return "optimal";
    case GpStatus::kMaxIters: return "max_iters";
    case GpStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

struct GpSolution {
  std::vector<double> values;
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  double log_objective = std::numeric_limits<double>::quiet_NaN();
  double kkt_residual = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  GpStatus status = GpStatus::kMaxIters;

  bool optimal() const { return status == GpStatus::kOptimal; }
};

/// Phase I looks for a strictly feasible point within e^{+-40} of the start.
inline constexpr double kPhaseOneRadius = 40.0;

struct SolverOptions {
  double kkt_tol = 1e-6;
  /// Target for the barrier duality-gap bound m/t, relative to max(1, |ln f0|).
  double gap_tol = 1e-10;
  std::size_t max_iters = 500;  // total Newton steps, both phases
  double barrier_growth = 20.0;
  /// When set, one JSON line per Newton step: phase, iteration, t, objective, decrement.
  std::ostream* trace = nullptr;
};

namespace detail {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// ln sum_i exp(a_i . y + b_i)
struct LseBlock {
  Mat A;
  Vec b;

  double value(const Vec& y) const {
    Vec z = A * y + b;
    const double m = z.maxCoeff();
    return m + std::log((z.array() - m).exp().sum());
  }

  /// Adds weight * gradient and weight * Hessian; returns the value.
  double accumulate(const Vec& y, double weight, Vec& grad, Mat& hess, Vec* own_grad = nullptr) const {
    Vec z = A * y + b;
    const double m = z.maxCoeff();
    Vec w = (z.array() - m).exp();
    const double s = w.sum();
    w /= s;
    Vec gr = A.transpose() * w;
    grad.noalias() += weight * gr;
    Mat Aw = A.transpose() * w.asDiagonal();
    hess.noalias() += weight * (Aw * A - gr * gr.transpose());
    if (own_grad) *own_grad = gr;
    return m + std::log(s);
  }

  Vec gradient(const Vec& y) const {
    Vec z = A * y + b;
    const double m = z.maxCoeff();
    Vec w = (z.array() - m).exp();
    w /= w.sum();
    return A.transpose() * w;
  }
};

inline LseBlock compile(const Posynomial& p, std::size_t nvars, std::size_t extra_cols = 0, double extra = 0.0) {
  LseBlock blk;
  blk.A = Mat::Zero(static_cast<Eigen::Index>(p.terms.size()), static_cast<Eigen::Index>(nvars + extra_cols));
  blk.b = Vec(static_cast<Eigen::Index>(p.terms.size()));
  for (std::size_t i = 0; i < p.terms.size(); ++i) {
    const auto& t = p.terms[i];
    blk.b(static_cast<Eigen::Index>(i)) = std::log(t.coeff);
    for (const auto& [v, e] : t.exponents) blk.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) = e;
    if (extra_cols) blk.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(nvars)) = extra;
  }
  return blk;
}

/// Barrier problem: minimize sum(objective) s.t. constraint_k(y) < 0, E y = e.
struct BarrierProblem {
  std::vector<LseBlock> objective;
  std::vector<LseBlock> constraints;
  Mat E;  // rows = equalities
  Vec e;
  Eigen::Index dim = 0;

  double objective_value(const Vec& y) const {
    double s = 0.0;
    for (const auto& blk : objective) s += blk.value(y);
    return s;
  }

  /// Strictly feasible with respect to the inequalities; fills values.
  bool interior(const Vec& y, std::vector<double>& values) const {
    values.resize(constraints.size());
    for (std::size_t k = 0; k < constraints.size(); ++k) {
      values[k] = constraints[k].value(y);
      if (!(values[k] < 0.0)) return false;
    }
    return true;
  }

  double barrier_value(const Vec& y, double t) const {
    std::vector<double> vals;
    if (!interior(y, vals)) return std::numeric_limits<double>::infinity();
    double phi = t * objective_value(y);
    for (double v : vals) phi -= std::log(-v);
    return phi;
  }
};

struct CenterResult {
  std::size_t steps = 0;
  bool budget_exhausted = false;
  bool stalled = false;
};

/// Centering stops once the squared Newton decrement falls below this.
inline constexpr double kCenterTol = 1e-10;

/// Solves [H E^T; E 0] [dy; w] = [-g; 0].
inline Vec newton_direction(Mat H, const Vec& g, const Mat& E) {
  const Eigen::Index n = H.rows();
  const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
  if (E.rows() == 0) {
    for (double reg = 0.0;; reg = (reg == 0.0 ? 1e-14 * scale : reg * 100.0)) {
      Mat Hr = H;
      Hr.diagonal().array() += reg;
      Eigen::LDLT<Mat> ldlt(Hr);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
        Vec d = ldlt.solve(-g);
        if (d.allFinite()) return d;
      }
      if (reg > 1e6 * scale) return -g / scale;
    }
  }
  const Eigen::Index m = E.rows();
  Mat K = Mat::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = H;
  K.topLeftCorner(n, n).diagonal().array() += 1e-14 * scale;
  K.topRightCorner(n, m) = E.transpose();
  K.bottomLeftCorner(m, n) = E;
  Vec rhs = Vec::Zero(n + m);
  rhs.head(n) = -g;
  Vec sol = K.fullPivLu().solve(rhs);
  return sol.head(n);
}

inline void emit_trace(std::ostream* os, const char* phase, std::size_t it, double t, double obj, double dec) {
  if (!os) return;
  *os << "{\"phase\":\"" << phase << "\",\"iteration\":" << it << ",\"t\":" << t << ",\"objective\":" << obj
      << ",\"decrement\":" << dec << "}\n";
}

/// Damped Newton minimization of t*f0(y) - sum ln(-f_k(y)) from an interior y.
template <typename StopEarly>
CenterResult center(const BarrierProblem& bp, Vec& y, double t, std::size_t& budget, const char* phase,
                    std::ostream* trace, std::size_t& counter, StopEarly stop_early) {
  CenterResult res;
  std::vector<double> vals;
  const Eigen::Index n = bp.dim;
  while (true) {
    if (budget == 0) {
      res.budget_exhausted = true;
      return res;
    }
    if (!bp.interior(y, vals)) throw InternalError("barrier iterate left the interior");
    Vec g = Vec::Zero(n);
    Mat H = Mat::Zero(n, n);
    for (const auto& blk : bp.objective) blk.accumulate(y, t, g, H);
    for (std::size_t k = 0; k < bp.constraints.size(); ++k) {
      Vec gk;
      Vec g_unused = Vec::Zero(n);
      Mat H_k = Mat::Zero(n, n);
      bp.constraints[k].accumulate(y, 1.0, g_unused, H_k, &gk);
      const double s = -vals[k];
      g.noalias() += gk / s;
      H.noalias() += H_k / s + (gk * gk.transpose()) / (s * s);
    }
    Vec dy = newton_direction(H, g, bp.E);
    const double dec2 = -g.dot(dy);
    emit_trace(trace, phase, counter, t, bp.objective_value(y), dec2);
    if (!(dec2 > kCenterTol) || !dy.allFinite()) return res;

    const double phi0 = bp.barrier_value(y, t);
    double step = 1.0;
    bool moved = false;
    double phi_new = phi0;
    for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
      Vec cand = y + step * dy;
      if (cand == y) break;  // step below resolution of y
      const double phi = bp.barrier_value(cand, t);
      if (std::isfinite(phi) && phi <= phi0 - 0.25 * step * dec2) {
        y = cand;
        moved = true;
        phi_new = phi;
        break;
      }
    }
    --budget;
    ++counter;
    ++res.steps;
    // No progress beyond rounding of the barrier value: as centered as it gets.
    if (!moved || phi0 - phi_new <= 8.0 * std::numeric_limits<double>::epsilon() * std::abs(phi0)) {
      res.stalled = true;
      return res;
    }
    if (stop_early(y)) return res;
  }
}

}  // namespace detail

/// Solves `prob` from `x0` (optional, strictly positive). The returned status
/// is kOptimal only when the relative KKT residual is within options.kkt_tol.
inline GpSolution solve_gp(const GpProblem& prob, std::optional<std::span<const double>> x0 = std::nullopt,
                           const SolverOptions& options = {}) {
  using detail::Mat;
  using detail::Vec;
  prob.check();
  const std::size_t nv = prob.num_variables;
  const auto n = static_cast<Eigen::Index>(nv);

  detail::BarrierProblem bp;
  bp.dim = n;
  for (const auto& f : prob.objective) bp.objective.push_back(detail::compile(f, nv));
  for (const auto& g : prob.inequalities) bp.constraints.push_back(detail::compile(g, nv));
  bp.E = Mat::Zero(static_cast<Eigen::Index>(prob.equalities.size()), n);
  bp.e = Vec::Zero(static_cast<Eigen::Index>(prob.equalities.size()));
  for (std::size_t q = 0; q < prob.equalities.size(); ++q) {
    const auto& m = prob.equalities[q];
    for (const auto& [v, e] : m.exponents) bp.E(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(v)) = e;
    bp.e(static_cast<Eigen::Index>(q)) = -std::log(m.coeff);
  }

  Vec y = Vec::Zero(n);
  if (x0) {
    if (x0->size() != nv) throw UsageError("solve_gp: start point has wrong dimension");
    for (std::size_t i = 0; i < nv; ++i) {
      if (!((*x0)[i] > 0.0) || !std::isfinite((*x0)[i])) throw UsageError("solve_gp: start point must be positive");
      y(static_cast<Eigen::Index>(i)) = std::log((*x0)[i]);
    }
  }
  if (bp.E.rows() > 0) {
    // Least-norm correction onto E y = e.
    Vec r = bp.e - bp.E * y;
    Vec w = (bp.E * bp.E.transpose()).completeOrthogonalDecomposition().solve(r);
    y += bp.E.transpose() * w;
    if ((bp.E * y - bp.e).cwiseAbs().maxCoeff() > 1e-8) {
      GpSolution sol;
      sol.status = GpStatus::kInfeasible;
      return sol;
    }
  }

  std::size_t budget = options.max_iters;
  std::size_t counter = 0;
  const std::size_t m = bp.constraints.size();
  std::vector<double> vals;

  // Phase I: minimize s subject to f_k(y) <= s, s >= -1.
  if (m > 0 && !bp.interior(y, vals)) {
    detail::BarrierProblem p1;
    p1.dim = n + 1;
    detail::LseBlock lin;
    lin.A = Mat::Zero(1, n + 1);
    lin.A(0, n) = 1.0;
    lin.b = Vec::Zero(1);
    p1.objective.push_back(lin);
    for (const auto& g : prob.inequalities) p1.constraints.push_back(detail::compile(g, nv, 1, -1.0));
    detail::LseBlock floor_blk;
    floor_blk.A = Mat::Zero(1, n + 1);
    floor_blk.A(0, n) = -1.0;
    floor_blk.b = Vec::Constant(1, -1.0);
    p1.constraints.push_back(floor_blk);
    // Trust box |y - y_start| < kPhaseOneRadius keeps the phase-I centers bounded.
    for (Eigen::Index i = 0; i < n; ++i) {
      for (double sgn : {1.0, -1.0}) {
        detail::LseBlock box;
        box.A = Mat::Zero(1, n + 1);
        box.A(0, i) = sgn;
        box.b = Vec::Constant(1, -sgn * y(i) - kPhaseOneRadius);
        p1.constraints.push_back(box);
      }
    }
    p1.E = Mat::Zero(bp.E.rows(), n + 1);
    p1.E.leftCols(n) = bp.E;
    p1.e = bp.e;

    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& blk : bp.constraints) worst = std::max(worst, blk.value(y));
    Vec z(n + 1);
    z.head(n) = y;
    z(n) = std::max(worst, 0.0) + 1.0;
    const double m1 = static_cast<double>(p1.constraints.size());
    bool found = false;
    for (double t = 1.0;; t *= options.barrier_growth) {
      auto res = detail::center(p1, z, t, budget, "phase1", options.trace, counter,
                                [](const Vec& zz) { return zz(zz.size() - 1) < -1e-3; });
      if (z(n) < 0.0) {
        found = true;
        break;
      }
      if (res.budget_exhausted) break;
      if (z(n) - m1 / t > 0.0) break;  // optimal s is certified positive
      if (m1 / t < 1e-10) break;
    }
    if (!found) {
      GpSolution sol;
      sol.status = budget == 0 ? GpStatus::kMaxIters : GpStatus::kInfeasible;
      sol.iterations = counter;
      sol.values.resize(nv);
      for (std::size_t i = 0; i < nv; ++i) sol.values[i] = std::exp(z(static_cast<Eigen::Index>(i)));
      return sol;
    }
    y = z.head(n);
  }

  // Phase II.
  const double md = static_cast<double>(m);
  double t = 1.0;
  bool exhausted = false;
  while (true) {
    auto res = detail::center(bp, y, t, budget, "phase2", options.trace, counter, [](const Vec&) { return false; });
    if (res.budget_exhausted) {
      exhausted = true;
      break;
    }
    if (m == 0) break;
    const double f0 = bp.objective_value(y);
    if (md / t <= options.gap_tol * std::max(1.0, std::abs(f0))) break;
    t *= options.barrier_growth;
  }

  GpSolution sol;
  sol.iterations = counter;
  sol.values.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) sol.values[i] = std::exp(y(static_cast<Eigen::Index>(i)));
  sol.log_objective = bp.objective_value(y);
  sol.objective_value = std::exp(sol.log_objective);

  // KKT residual. The barrier multipliers lambda_k = 1 / (t (-f_k)) lose
  // precision close to the boundary, so they are also refined by least
  // squares over the near-active constraints; the better certificate counts.
  Vec g0 = Vec::Zero(n);
  for (const auto& blk : bp.objective) g0 += blk.gradient(y);
  bp.interior(y, vals);
  auto project_out_equalities = [&](Vec r) {
    if (bp.E.rows() > 0) {
      Vec nu = bp.E.transpose().completeOrthogonalDecomposition().solve(r);
      r -= bp.E.transpose() * nu;
    }
    return r;
  };
  const double g_scale = 1.0 + g0.cwiseAbs().maxCoeff();
  const double f_scale = 1.0 + std::abs(sol.log_objective);

  Vec r = g0;
  std::vector<double> lambda(m);
  double lambda_max = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    lambda[k] = 1.0 / (t * -vals[k]);
    lambda_max = std::max(lambda_max, lambda[k]);
    r += bp.constraints[k].gradient(y) * lambda[k];
  }
  double residual = std::max(project_out_equalities(r).cwiseAbs().maxCoeff() / g_scale, m ? md / t / f_scale : 0.0);

  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < m; ++k) {
    if (lambda[k] >= 1e-6 * std::max(1.0, lambda_max)) active.push_back(k);
  }
  if (!active.empty()) {
    const auto na = static_cast<Eigen::Index>(active.size());
    Mat J(n, na + bp.E.rows());
    for (Eigen::Index a = 0; a < na; ++a) J.col(a) = bp.constraints[active[static_cast<std::size_t>(a)]].gradient(y);
    if (bp.E.rows() > 0) J.rightCols(bp.E.rows()) = bp.E.transpose();
    Vec mult = J.completeOrthogonalDecomposition().solve(-g0);
    if ((mult.head(na).array() >= 0.0).all()) {
      double slack = 0.0;
      for (Eigen::Index a = 0; a < na; ++a) slack += mult(a) * -vals[active[static_cast<std::size_t>(a)]];
      for (std::size_t k = 0; k < m; ++k) {
        if (std::find(active.begin(), active.end(), k) == active.end()) slack += lambda[k] * -vals[k];
      }
      Vec rr = g0 + J * mult;
      for (std::size_t k = 0; k < m; ++k) {
        if (std::find(active.begin(), active.end(), k) == active.end()) rr += bp.constraints[k].gradient(y) * lambda[k];
      }
      residual = std::min(residual, std::max(rr.cwiseAbs().maxCoeff() / g_scale, slack / f_scale));
    }
  }
  sol.kkt_residual = residual;
  sol.status = (!exhausted && sol.kkt_residual <= options.kkt_tol) ? GpStatus::kOptimal : GpStatus::kMaxIters;
  return sol;
}

}  // namespace mcofdma::gp
