#pragma once

// Linear-in-parameter Lyapunov candidate templates.
//
// Both shipped families keep V_theta and grad(V_theta) . y linear in theta,
// which is what lets the learner treat sample constraints as halfspaces:
//   quadratic       V(x) = 1/2 x^T Theta x,  Theta symmetric, d = n(n+1)/2
//   tanh_quadratic  V(x) = Tanh(x)^T Theta Tanh(x),  d = n^2
// The feature maps below satisfy v_features(x) . theta == V_theta(x) and
// lie_features(x, y) . theta == grad(V_theta)(x) . y identically.

#include <lyacert/interval.hpp>
#include <lyacert/linalg.hpp>
#include <lyacert/system.hpp>

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace lyacert {

enum class TemplateFamily { Quadratic, TanhQuadratic };

struct TemplateKind {
  TemplateFamily family = TemplateFamily::Quadratic;
  int n = 2;

  int param_dim() const {
    return family == TemplateFamily::Quadratic ? n * (n + 1) / 2 : n * n;
  }

  static TemplateKind quadratic(int n) { return {TemplateFamily::Quadratic, n}; }
  static TemplateKind tanh_quadratic(int n) { return {TemplateFamily::TanhQuadratic, n}; }

  std::string name() const {
    return family == TemplateFamily::Quadratic ? "quadratic" : "tanh_quadratic";
  }

  friend bool operator==(const TemplateKind& a, const TemplateKind& b) {
    return a.family == b.family && a.n == b.n;
  }
};

struct Candidate {
  TemplateKind kind;
  Vector theta;

  Candidate() = default;
  Candidate(TemplateKind k, Vector t) : kind(k), theta(std::move(t)) {
    if (theta.size() != kind.param_dim())
      throw DimensionMismatch("candidate parameter dimension mismatch");
  }
};

namespace detail {

// Symmetric packing for the quadratic family: Theta_ij = Theta_ji = theta_k
// with k = i(i+1)/2 + j for 0 <= j <= i < n.
inline int quad_index(int i, int j) {
  if (j > i) std::swap(i, j);
  return i * (i + 1) / 2 + j;
}

inline void check_state_dim(const TemplateKind& kind, const Vector& x, const char* op) {
  if (x.size() != kind.n) throw DimensionMismatch(std::string(op) + ": state dimension mismatch");
}

}  // namespace detail

/// Materialize Theta from the packed parameter vector.
inline Matrix theta_matrix(const Candidate& c) {
  const int n = c.kind.n;
  Matrix m(n, n);
  if (c.kind.family == TemplateFamily::Quadratic) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = c.theta[detail::quad_index(i, j)];
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = c.theta[i * n + j];
  }
  return m;
}

inline double evaluate_v(const Candidate& c, const State& x) {
  detail::check_state_dim(c.kind, x, "evaluate_v");
  const Matrix th = theta_matrix(c);
  if (c.kind.family == TemplateFamily::Quadratic) return 0.5 * x.dot(th * x);
  const Vector t = x.array().tanh();
  return t.dot(th * t);
}

inline Vector gradient_v(const Candidate& c, const State& x) {
  detail::check_state_dim(c.kind, x, "gradient_v");
  const Matrix th = theta_matrix(c);
  if (c.kind.family == TemplateFamily::Quadratic) return th * x;
  // d/dx_k [Tanh(x)^T Theta Tanh(x)] = sech^2(x_k) ((Theta + Theta^T) Tanh(x))_k
  const Vector t = x.array().tanh();
  const Vector s = ((th + th.transpose()) * t);
  Vector g(c.kind.n);
  for (int k = 0; k < c.kind.n; ++k) {
    const double tk = std::tanh(x[k]);
    g[k] = (1.0 - tk * tk) * s[k];
  }
  return g;
}

/// Feature map phi with phi(x) . theta == V_theta(x) for every theta.
inline Vector v_features(const TemplateKind& kind, const State& x) {
  detail::check_state_dim(kind, x, "v_features");
  const int n = kind.n;
  Vector phi(kind.param_dim());
  if (kind.family == TemplateFamily::Quadratic) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j)
        phi[detail::quad_index(i, j)] = (i == j) ? 0.5 * x[i] * x[i] : x[i] * x[j];
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        phi[i * n + j] = std::tanh(x[i]) * std::tanh(x[j]);
  }
  return phi;
}

/// Feature map psi with psi(x, y) . theta == grad(V_theta)(x) . y.
inline Vector lie_features(const TemplateKind& kind, const State& x, const State& y) {
  detail::check_state_dim(kind, x, "lie_features");
  if (y.size() != kind.n) throw DimensionMismatch("lie_features: output dimension mismatch");
  const int n = kind.n;
  Vector psi(kind.param_dim());
  if (kind.family == TemplateFamily::Quadratic) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j)
        psi[detail::quad_index(i, j)] =
            (i == j) ? x[i] * y[i] : x[i] * y[j] + x[j] * y[i];
  } else {
    for (int i = 0; i < n; ++i) {
      const double ti = std::tanh(x[i]);
      const double si = 1.0 - ti * ti;
      for (int j = 0; j < n; ++j) {
        const double tj = std::tanh(x[j]);
        const double sj = 1.0 - tj * tj;
        psi[i * n + j] = y[i] * si * tj + ti * y[j] * sj;
      }
    }
  }
  return psi;
}

// ---------------------------------------------------------------------------
// Interval evaluation over axis-aligned boxes (used by the falsifier and the
// positivity check).
// ---------------------------------------------------------------------------

inline Interval interval_evaluate_v(const Candidate& c, const std::vector<Interval>& box) {
  const int n = c.kind.n;
  const Matrix th = theta_matrix(c);
  std::vector<Interval> t(n);
  if (c.kind.family == TemplateFamily::Quadratic) {
    for (int i = 0; i < n; ++i) t[i] = box[i];
  } else {
    for (int i = 0; i < n; ++i) t[i] = interval_tanh(box[i]);
  }
  Interval acc(0.0);
  for (int i = 0; i < n; ++i) {
    // Diagonal terms through square() for a tighter enclosure.
    acc = acc + Interval(th(i, i)) * square(t[i]);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      acc = acc + Interval(th(i, j)) * (t[i] * t[j]);
    }
  }
  if (c.kind.family == TemplateFamily::Quadratic) return Interval(0.5) * acc;
  return acc;
}

inline std::vector<Interval> interval_gradient_v(const Candidate& c,
                                                 const std::vector<Interval>& box) {
  const int n = c.kind.n;
  const Matrix th = theta_matrix(c);
  std::vector<Interval> g(n);
  if (c.kind.family == TemplateFamily::Quadratic) {
    for (int k = 0; k < n; ++k) {
      Interval acc(0.0);
      for (int j = 0; j < n; ++j) acc = acc + Interval(th(k, j)) * box[j];
      g[k] = acc;
    }
    return g;
  }
  std::vector<Interval> t(n);
  for (int i = 0; i < n; ++i) t[i] = interval_tanh(box[i]);
  const Matrix sym = th + th.transpose();
  for (int k = 0; k < n; ++k) {
    Interval acc(0.0);
    for (int j = 0; j < n; ++j) acc = acc + Interval(sym(k, j)) * t[j];
    g[k] = interval_sech2(box[k]) * acc;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Positivity certification (Lyapunov condition V > 0 on the region)
// ---------------------------------------------------------------------------

enum class PositivityStatus { Certified, Counterexample, Inconclusive };

struct PositivityResult {
  PositivityStatus status = PositivityStatus::Inconclusive;
  State counterexample;  // valid when status == Counterexample
};

struct PositivityBudget {
  int max_splits = 10000;
  double min_box_width = 1e-6;
};

namespace detail {

// Branch-and-bound falsification of V(x) <= 0 over the region: discard boxes
// where V is provably positive or that provably miss the region; report a
// midpoint with certified V <= 0 as a counterexample.
inline PositivityResult positivity_branch_and_bound(const Candidate& c,
                                                    const RegionOfInterest& roi,
                                                    const PositivityBudget& budget) {
  Vector lo, hi;
  roi.bounding_box(lo, hi);
  const int n = roi.dimension();

  std::deque<std::vector<Interval>> queue;
  {
    std::vector<Interval> root(n);
    for (int i = 0; i < n; ++i) root[i] = Interval(lo[i], hi[i]);
    queue.push_back(std::move(root));
  }

  int splits = 0;
  bool undecided = false;
  while (!queue.empty()) {
    std::vector<Interval> box = std::move(queue.front());
    queue.pop_front();

    if (roi.certainly_outside(box)) continue;
    const Interval v = interval_evaluate_v(c, box);
    if (v.lo > 0.0) continue;

    State mid(n);
    for (int i = 0; i < n; ++i) mid[i] = box[i].mid();
    if (roi.contains(mid)) {
      std::vector<Interval> pt(n);
      for (int i = 0; i < n; ++i) pt[i] = Interval(mid[i]);
      if (interval_evaluate_v(c, pt).hi <= 0.0)
        return {PositivityStatus::Counterexample, mid};
    }

    int widest = 0;
    double w = -1.0;
    for (int i = 0; i < n; ++i)
      if (box[i].width() > w) {
        w = box[i].width();
        widest = i;
      }
    if (w < budget.min_box_width) {
      undecided = true;
      continue;
    }
    if (splits >= budget.max_splits) return {PositivityStatus::Inconclusive, {}};
    ++splits;
    const double m = box[widest].mid();
    std::vector<Interval> left = box, right = box;
    left[widest] = Interval(box[widest].lo, m);
    right[widest] = Interval(m, box[widest].hi);
    queue.push_back(std::move(left));
    queue.push_back(std::move(right));
  }
  if (undecided) return {PositivityStatus::Inconclusive, {}};
  return {PositivityStatus::Certified, {}};
}

// Scale a direction onto the region, if some positive multiple lands in it.
inline bool scale_direction_into_roi(const RegionOfInterest& roi, const Vector& dir,
                                     State& out) {
  const double nrm = dir.norm();
  if (!(nrm > 0.0)) return false;
  if (roi.is_annulus()) {
    const auto& a = roi.annulus();
    out = dir * (0.5 * (a.r_min + a.r_max) / nrm);
    return true;
  }
  const auto& b = roi.box_shell();
  double t_lo = 0.0, t_hi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < roi.dimension(); ++i) {
    const double a = std::abs(dir[i]);
    if (a < 1e-300) return false;  // axis pinned at 0 < inner_i
    t_lo = std::max(t_lo, b.inner[i] / a);
    t_hi = std::min(t_hi, b.outer[i] / a);
  }
  if (t_lo > t_hi) return false;
  out = dir * (0.5 * (t_lo + t_hi));
  return roi.contains(out);
}

}  // namespace detail

/// Check Lyapunov positivity of the candidate over the region of interest.
///
/// Quadratic candidates take the definite-matrix fast path: a successful
/// Cholesky factorization of Theta certifies V > 0 everywhere off the origin;
/// otherwise the minimum-eigenvalue direction, scaled into the region, is a
/// state with V <= 0. The general path (and box shells that the eigenvector
/// line misses) falls back to interval branch and bound.
inline PositivityResult positivity_certificate(const Candidate& c,
                                               const RegionOfInterest& roi,
                                               const PositivityBudget& budget = {}) {
  if (roi.dimension() != c.kind.n)
    throw DimensionMismatch("positivity_certificate: dimension mismatch");
  if (c.kind.family == TemplateFamily::Quadratic) {
    const Matrix th = theta_matrix(c);
    Eigen::LLT<Matrix> llt(th);
    if (llt.info() == Eigen::Success) return {PositivityStatus::Certified, {}};
    Eigen::SelfAdjointEigenSolver<Matrix> eig(th);
    const int k = 0;  // eigenvalues ascending
    if (eig.eigenvalues()[k] > 0.0) return {PositivityStatus::Certified, {}};
    State x;
    if (detail::scale_direction_into_roi(roi, eig.eigenvectors().col(k), x))
      return {PositivityStatus::Counterexample, x};
  }
  return detail::positivity_branch_and_bound(c, roi, budget);
}

}  // namespace lyacert
