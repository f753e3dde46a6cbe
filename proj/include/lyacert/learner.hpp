#pragma once

// Analytic-center proposer over the sample-compatibility polytope.
//
// H_S lives inside the unit parameter hypercube and gains two halfspaces per
// learning sample: V_theta(x) > 0 and grad(V_theta)(x) . y < 0, realized with
// a small margin to keep the inequalities strict. Strict feasibility is
// decided by the phase LP  max s  s.t.  a_i . theta + s <= b_i, s <= s_cap;
// its maximizer keeps every slack >= s*, which makes it a safe interior
// start for the barrier Newton iteration that finds the analytic center.

#include <lyacert/linalg.hpp>
#include <lyacert/system.hpp>
#include <lyacert/templates.hpp>

#include <cmath>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace lyacert {

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Halfspace {theta : normal . theta < offset}.
struct Halfspace {
  Vector normal;
  double offset = 0.0;
};

constexpr double kCompatibilityMargin = 1e-9;

class CompatibilityPolytope {
 public:
  explicit CompatibilityPolytope(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  const std::vector<Halfspace>& rows() const { return rows_; }

  void add_row(Vector normal, double offset) {
    if (normal.size() != dim_) throw DimensionMismatch("polytope row dimension mismatch");
    rows_.push_back({std::move(normal), offset});
  }

  /// The 2d rows of the unit hypercube |theta_i| < 1/2.
  void add_hypercube_rows() {
    for (int i = 0; i < dim_; ++i) {
      Vector e = Vector::Zero(dim_);
      e[i] = 1.0;
      add_row(e, 0.5);
      add_row(-e, 0.5);
    }
  }

  /// Two rows per sample: -phi . theta < -margin and psi . theta < -margin.
  void add_sample_rows(const TemplateKind& kind, const Sample& s,
                       double margin = kCompatibilityMargin) {
    add_row(-v_features(kind, s.x), -margin);
    add_row(lie_features(kind, s.x, s.y), -margin);
  }

  static CompatibilityPolytope for_samples(const TemplateKind& kind,
                                           const std::vector<Sample>& samples,
                                           double margin = kCompatibilityMargin) {
    CompatibilityPolytope p(kind.param_dim());
    p.add_hypercube_rows();
    for (const auto& s : samples) p.add_sample_rows(kind, s, margin);
    return p;
  }

 private:
  int dim_;
  std::vector<Halfspace> rows_;
};

struct FeasibilityResult {
  bool feasible = false;
  double s_star = 0.0;
  Vector interior;  // LP maximizer; strictly interior when feasible
};

namespace detail {

// Revised simplex on the dual of  max s  s.t.  a_i.theta + s <= b_i,
// s <= s_cap. The dual (min b^T y, A^T y = c, y >= 0) has only dim+1
// equality constraints, so the basis stays tiny no matter how many sample
// rows accumulate. The cap column plus the +e_i cube columns form an initial
// feasible basis. Dantzig pricing with a switch to Bland's rule on stall.
class PhaseLp {
 public:
  PhaseLp(const CompatibilityPolytope& p, double s_cap) : d_(p.dim()), nb_(d_ + 1) {
    const auto& rows = p.rows();
    cols_.reserve(rows.size() + 1);
    rhs_.reserve(rows.size() + 1);
    for (const auto& r : rows) {
      Vector col(nb_);
      col.head(d_) = r.normal;
      col[d_] = 1.0;
      cols_.push_back(std::move(col));
      rhs_.push_back(r.offset);
    }
    Vector cap = Vector::Zero(nb_);
    cap[d_] = 1.0;
    cols_.push_back(std::move(cap));
    rhs_.push_back(s_cap);
  }

  FeasibilityResult solve() {
    const int m = static_cast<int>(cols_.size());
    // Initial basis: the +e_i hypercube columns (at positions 2i) and cap.
    std::vector<int> basis(nb_);
    for (int i = 0; i < d_; ++i) basis[i] = 2 * i;
    basis[d_] = m - 1;

    Vector c_obj = Vector::Zero(nb_);
    c_obj[d_] = 1.0;

    const long max_iter = 200L * m + 2000;
    long stall_switch = 20L * m + 200;
    for (long iter = 0; iter < max_iter; ++iter) {
      Matrix B(nb_, nb_);
      for (int k = 0; k < nb_; ++k) B.col(k) = cols_[basis[k]];
      Eigen::PartialPivLU<Matrix> lu(B);
      const Vector y_b = lu.solve(c_obj);
      Vector c_b(nb_);
      for (int k = 0; k < nb_; ++k) c_b[k] = rhs_[basis[k]];
      const Vector pi = lu.transpose().solve(c_b);

      // Price nonbasic columns.
      int entering = -1;
      double best = 0.0;
      const bool bland = iter >= stall_switch;
      for (int j = 0; j < m; ++j) {
        bool in_basis = false;
        for (int k = 0; k < nb_; ++k)
          if (basis[k] == j) {
            in_basis = true;
            break;
          }
        if (in_basis) continue;
        const double dot = pi.dot(cols_[j]);
        const double r = rhs_[j] - dot;
        const double tol = 1e-10 * (1.0 + std::abs(rhs_[j]) + std::abs(dot));
        if (r < -tol) {
          if (bland) {
            entering = j;
            break;
          }
          if (r < best) {
            best = r;
            entering = j;
          }
        }
      }
      if (entering < 0) {
        FeasibilityResult res;
        res.s_star = pi[d_];
        res.feasible = res.s_star > 0.0;
        res.interior = pi.head(d_);
        return res;
      }

      const Vector w = lu.solve(cols_[entering]);
      int leaving = -1;
      double t_min = 0.0;
      for (int k = 0; k < nb_; ++k) {
        if (w[k] > 1e-11) {
          const double t = std::max(y_b[k], 0.0) / w[k];
          if (leaving < 0 || t < t_min - 1e-14 ||
              (t <= t_min + 1e-14 && basis[k] < basis[leaving])) {
            leaving = k;
            t_min = t;
          }
        }
      }
      if (leaving < 0)
        throw NumericalFailure("feasibility LP: dual unbounded (numerical breakdown)");
      basis[leaving] = entering;
    }
    throw NumericalFailure("feasibility LP: iteration limit reached");
  }

 private:
  int d_;
  int nb_;
  std::vector<Vector> cols_;
  std::vector<double> rhs_;
};

}  // namespace detail

/// Decide strict feasibility of the polytope; on success the returned point
/// has every slack >= s_star > 0.
inline FeasibilityResult strict_feasibility(const CompatibilityPolytope& p,
                                            double s_cap = 1.0) {
  return detail::PhaseLp(p, s_cap).solve();
}

struct NewtonOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-8;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
};

/// Analytic center: maximizer of sum_i ln(offset_i - normal_i . theta),
/// computed by damped Newton from a strictly interior start.
inline Vector analytic_center(const CompatibilityPolytope& p, const Vector& start,
                              const NewtonOptions& opts = {}) {
  const int d = p.dim();
  const auto& rows = p.rows();

  const auto slacks_ok = [&](const Vector& th, Vector& s) {
    s.resize(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
      s[static_cast<Eigen::Index>(i)] = rows[i].offset - rows[i].normal.dot(th);
      if (!(s[static_cast<Eigen::Index>(i)] > 0.0)) return false;
    }
    return true;
  };
  const auto barrier = [&](const Vector& s) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) f -= std::log(s[i]);
    return f;
  };

  Vector theta = start;
  Vector slack;
  if (!slacks_ok(theta, slack))
    throw NumericalFailure("analytic_center: start is not strictly interior");

  for (int it = 0; it < opts.max_iterations; ++it) {
    Vector grad = Vector::Zero(d);
    Matrix hess = Matrix::Zero(d, d);
    for (size_t i = 0; i < rows.size(); ++i) {
      const double inv = 1.0 / slack[static_cast<Eigen::Index>(i)];
      grad += rows[i].normal * inv;
      hess.noalias() += (rows[i].normal * rows[i].normal.transpose()) * (inv * inv);
    }
    if (grad.norm() <= opts.gradient_tol) return theta;

    Eigen::LDLT<Matrix> ldlt(hess);
    if (ldlt.info() != Eigen::Success)
      throw NumericalFailure("analytic_center: Hessian factorization failed");
    const Vector step = -ldlt.solve(grad);
    const double slope = grad.dot(step);
    if (!(slope < 0.0))
      throw NumericalFailure("analytic_center: non-descent Newton step");

    const double f0 = barrier(slack);
    double alpha = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Vector trial = theta + alpha * step;
      Vector ts;
      if (slacks_ok(trial, ts) && barrier(ts) <= f0 + opts.armijo_c * alpha * slope) {
        theta = trial;
        slack = ts;
        moved = true;
        break;
      }
      alpha *= opts.backtrack;
    }
    if (!moved) throw NumericalFailure("analytic_center: line search failed");
  }
  throw NumericalFailure("analytic_center: Newton did not converge");
}

/// Learner entry point: returns the analytic-center candidate compatible with
/// every input sample, or nullopt when no compatible candidate exists in the
/// hypothesis space.
inline std::optional<Candidate> propose(const std::vector<Sample>& samples_in_roi,
                                        const TemplateKind& kind) {
  // Duplicate states (repeated counterexamples) would skew the center.
  std::vector<Sample> unique;
  unique.reserve(samples_in_roi.size());
  std::unordered_set<std::string> seen;
  for (const auto& s : samples_in_roi) {
    std::string key(reinterpret_cast<const char*>(s.x.data()),
                    sizeof(double) * static_cast<size_t>(s.x.size()));
    if (seen.insert(std::move(key)).second) unique.push_back(s);
  }

  const CompatibilityPolytope poly = CompatibilityPolytope::for_samples(kind, unique);
  const FeasibilityResult lp = strict_feasibility(poly);
  if (!lp.feasible) return std::nullopt;
  return Candidate(kind, analytic_center(poly, lp.interior));
}

}  // namespace lyacert
