#pragma once

// Black-box dynamics oracle, region-of-interest geometry, and the benchmark
// registry. A BlackBoxSystem exposes pointwise derivative evaluation only;
// the registered dynamics stay behind the oracle so nothing downstream can
// peek at the closed form (the white-box handle on Benchmark is for the
// independent validator, not the engine).

#include <lyacert/interval.hpp>
#include <lyacert/linalg.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace lyacert {

using State = Vector;

/// One oracle observation (x, y = f(x)). Immutable once recorded.
struct Sample {
  State x;
  State y;
};

struct SampleBudgetExhausted : std::runtime_error {
  explicit SampleBudgetExhausted(std::uint64_t budget)
      : std::runtime_error("oracle sample budget exhausted (" +
                           std::to_string(budget) + " evaluations)") {}
};

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Region of interest
// ---------------------------------------------------------------------------

/// Annulus {x : r_min <= |x| <= r_max}, origin excluded by r_min > 0.
struct Annulus {
  double r_min = 0.0;
  double r_max = 0.0;
};

/// Per-axis shell {x : inner_i <= |x_i| <= outer_i for every i}.
struct BoxShell {
  Vector inner;
  Vector outer;
};

class RegionOfInterest {
 public:
  RegionOfInterest(int dimension, Annulus a) : dim_(dimension), shape_(a) {
    if (!(a.r_min > 0.0) || !(a.r_max > a.r_min))
      throw std::invalid_argument("annulus requires 0 < r_min < r_max");
  }
  RegionOfInterest(int dimension, BoxShell b) : dim_(dimension), shape_(std::move(b)) {
    const auto& s = std::get<BoxShell>(shape_);
    if (s.inner.size() != dim_ || s.outer.size() != dim_)
      throw DimensionMismatch("box shell half-width dimension mismatch");
    for (int i = 0; i < dim_; ++i)
      if (!(s.inner[i] > 0.0) || !(s.outer[i] > s.inner[i]))
        throw std::invalid_argument("box shell requires 0 < inner_i < outer_i");
  }

  int dimension() const { return dim_; }
  bool is_annulus() const { return std::holds_alternative<Annulus>(shape_); }
  const Annulus& annulus() const { return std::get<Annulus>(shape_); }
  const BoxShell& box_shell() const { return std::get<BoxShell>(shape_); }

  bool contains(const State& x) const {
    if (x.size() != dim_) throw DimensionMismatch("roi_contains: dimension mismatch");
    if (const auto* a = std::get_if<Annulus>(&shape_)) {
      const double r = x.norm();
      return r >= a->r_min && r <= a->r_max;
    }
    const auto& b = std::get<BoxShell>(shape_);
    for (int i = 0; i < dim_; ++i) {
      const double v = std::abs(x[i]);
      if (v < b.inner[i] || v > b.outer[i]) return false;
    }
    return true;
  }

  /// Tight axis-aligned box enclosing the region.
  void bounding_box(Vector& lo, Vector& hi) const {
    lo.resize(dim_);
    hi.resize(dim_);
    if (const auto* a = std::get_if<Annulus>(&shape_)) {
      lo.setConstant(-a->r_max);
      hi.setConstant(a->r_max);
      return;
    }
    const auto& b = std::get<BoxShell>(shape_);
    lo = -b.outer;
    hi = b.outer;
  }

  /// True only when every point of the interval box is provably outside X.
  bool certainly_outside(const std::vector<Interval>& box) const {
    if (const auto* a = std::get_if<Annulus>(&shape_)) {
      Interval s(0.0);
      for (const auto& xi : box) s = s + square(xi);
      const Interval rm2 = square(Interval(a->r_min));
      const Interval rx2 = square(Interval(a->r_max));
      return s.hi < rm2.lo || s.lo > rx2.hi;
    }
    const auto& b = std::get<BoxShell>(shape_);
    for (int i = 0; i < dim_; ++i) {
      const Interval ai = interval_abs(box[i]);
      if (ai.hi < b.inner[i] || ai.lo > b.outer[i]) return true;
    }
    return false;
  }

  /// True only when every point of the interval box is provably inside X.
  bool certainly_inside(const std::vector<Interval>& box) const {
    if (const auto* a = std::get_if<Annulus>(&shape_)) {
      Interval s(0.0);
      for (const auto& xi : box) s = s + square(xi);
      const Interval rm2 = square(Interval(a->r_min));
      const Interval rx2 = square(Interval(a->r_max));
      return s.lo >= rm2.hi && s.hi <= rx2.lo;
    }
    const auto& b = std::get<BoxShell>(shape_);
    for (int i = 0; i < dim_; ++i) {
      const Interval ai = interval_abs(box[i]);
      if (!(ai.lo >= b.inner[i] && ai.hi <= b.outer[i])) return false;
    }
    return true;
  }

 private:
  int dim_;
  std::variant<Annulus, BoxShell> shape_;
};

// ---------------------------------------------------------------------------
// Black-box system
// ---------------------------------------------------------------------------

/// Regional Lipschitz bound callback: given an axis-aligned box (lo, hi)
/// enclosing the region, return a Lipschitz bound valid on that box.
using RegionalLipFn = std::function<double(const Vector&, const Vector&)>;

constexpr std::uint64_t kDefaultSampleBudget = 500000;

/// Opaque dynamics oracle with atomic budget accounting. Safe to call from
/// multiple verification workers; the sample counter is the only shared
/// mutable state.
class BlackBoxSystem {
 public:
  BlackBoxSystem(int dimension, std::function<Vector(const Vector&)> eval,
                 double global_lip, RegionalLipFn regional_lip = nullptr,
                 std::uint64_t sample_budget = kDefaultSampleBudget)
      : dim_(dimension),
        eval_(std::move(eval)),
        global_lip_(global_lip),
        regional_lip_(std::move(regional_lip)),
        budget_(sample_budget) {
    if (dim_ < 1) throw std::invalid_argument("system dimension must be >= 1");
    if (!(global_lip_ > 0.0)) throw std::invalid_argument("Lipschitz bound must be > 0");
  }

  int dimension() const { return dim_; }
  std::uint64_t samples_used() const { return counter_.load(std::memory_order_relaxed); }
  std::uint64_t sample_budget() const { return budget_; }

  /// Query the oracle at x. Deterministic; counts against the budget.
  State evaluate(const State& x) const {
    if (x.size() != dim_) throw DimensionMismatch("evaluate: dimension mismatch");
    const std::uint64_t n = counter_.fetch_add(1, std::memory_order_relaxed);
    if (n >= budget_) {
      counter_.fetch_sub(1, std::memory_order_relaxed);
      throw SampleBudgetExhausted(budget_);
    }
    return eval_(x);
  }

  double global_lipschitz() const { return global_lip_; }

  /// Regional bound for the box [lo, hi]; falls back to the global bound and
  /// never exceeds it.
  double regional_lipschitz(const Vector& lo, const Vector& hi) const {
    if (!regional_lip_) return global_lip_;
    return std::min(global_lip_, regional_lip_(lo, hi));
  }

  bool has_regional_bound() const { return static_cast<bool>(regional_lip_); }

 private:
  int dim_;
  std::function<Vector(const Vector&)> eval_;
  double global_lip_;
  RegionalLipFn regional_lip_;
  std::uint64_t budget_;
  mutable std::atomic<std::uint64_t> counter_{0};
};

// ---------------------------------------------------------------------------
// Benchmark registry
// ---------------------------------------------------------------------------

/// A registered benchmark. `dynamics` doubles as the oracle implementation
/// and as the white-box handle used by the result validator.
struct Benchmark {
  std::string name;
  int dimension = 0;
  std::function<Vector(const Vector&)> dynamics;
  double lipschitz = 0.0;
  RegionalLipFn regional;  // optional
  std::function<RegionOfInterest()> default_roi;
  Vector domain_lo;
  Vector domain_hi;
};

namespace detail {

inline Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}
inline Vector vec3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

// Reversed-time Van der Pol oscillator (mu = 1): the origin is stable and the
// surrounding limit cycle repels inward.
inline Vector vanderpol_rhs(const Vector& x) {
  Vector y(2);
  y[0] = -x[1];
  y[1] = x[0] - (1.0 - x[0] * x[0]) * x[1];
  return y;
}

// Frobenius norm of the Van der Pol Jacobian bounded over a box by interval
// arithmetic: |J|_F^2 = 1 + (1 + 2 x1 x2)^2 + (x1^2 - 1)^2.
inline double vanderpol_regional_lip(const Vector& lo, const Vector& hi) {
  const Interval x1(lo[0], hi[0]);
  const Interval x2(lo[1], hi[1]);
  const Interval t1 = square(Interval(1.0) + 2.0 * (x1 * x2));
  const Interval t2 = square(square(x1) - Interval(1.0));
  return std::sqrt(1.0 + t1.hi + t2.hi);
}

// Stanley path-following kinematics (constant speed v, wheelbase l, gain k):
// state (e, psi) = (cross-track error, heading error), steering saturated at
// |delta| <= pi/4. Piecewise continuous; the Frobenius bound over all pieces
// is sqrt((1 + 1/l^2) (v^2 + k^2)).
struct StanleyParams {
  double k = 0.45;
  double l = 1.75;
  double v = 2.8;
};

inline Vector stanley_rhs(const Vector& x, const StanleyParams& p) {
  const double e = x[0], psi = x[1];
  const double delta_max = M_PI / 4.0;
  double delta = psi + std::atan(p.k * e / p.v);
  delta = std::clamp(delta, -delta_max, delta_max);
  Vector y(2);
  y[0] = p.v * std::sin(psi - delta);
  y[1] = -(p.v / p.l) * std::sin(delta);
  return y;
}

}  // namespace detail

inline const std::vector<Benchmark>& benchmark_registry() {
  static const std::vector<Benchmark> registry = [] {
    std::vector<Benchmark> r;

    {
      Benchmark b;
      b.name = "vanderpol";
      b.dimension = 2;
      b.dynamics = detail::vanderpol_rhs;
      b.lipschitz = 4.632;
      b.regional = detail::vanderpol_regional_lip;
      b.default_roi = [] { return RegionOfInterest(2, Annulus{0.2, 1.2}); };
      b.domain_lo = detail::vec2(-1.2, -1.2);
      b.domain_hi = detail::vec2(1.2, 1.2);
      r.push_back(std::move(b));
    }
    {
      Benchmark b;
      b.name = "linear_stable";
      b.dimension = 2;
      b.dynamics = [](const Vector& x) -> Vector { return -x; };
      b.lipschitz = std::sqrt(2.0);
      b.regional = [](const Vector&, const Vector&) { return std::sqrt(2.0); };
      b.default_roi = [] { return RegionOfInterest(2, Annulus{0.1, 1.0}); };
      b.domain_lo = detail::vec2(-1.0, -1.0);
      b.domain_hi = detail::vec2(1.0, 1.0);
      r.push_back(std::move(b));
    }
    {
      Benchmark b;
      b.name = "linear_unstable";
      b.dimension = 2;
      b.dynamics = [](const Vector& x) -> Vector { return x; };
      b.lipschitz = std::sqrt(2.0);
      b.regional = [](const Vector&, const Vector&) { return std::sqrt(2.0); };
      b.default_roi = [] { return RegionOfInterest(2, Annulus{0.1, 1.0}); };
      b.domain_lo = detail::vec2(-1.0, -1.0);
      b.domain_hi = detail::vec2(1.0, 1.0);
      r.push_back(std::move(b));
    }
    {
      Benchmark b;
      b.name = "linear_stable_3d";
      b.dimension = 3;
      b.dynamics = [](const Vector& x) -> Vector { return -x; };
      b.lipschitz = std::sqrt(3.0);
      b.regional = [](const Vector&, const Vector&) { return std::sqrt(3.0); };
      b.default_roi = [] { return RegionOfInterest(3, Annulus{0.1, 1.0}); };
      b.domain_lo = detail::vec3(-1.0, -1.0, -1.0);
      b.domain_hi = detail::vec3(1.0, 1.0, 1.0);
      r.push_back(std::move(b));
    }
    {
      Benchmark b;
      b.name = "stanley";
      b.dimension = 2;
      const detail::StanleyParams p;
      b.dynamics = [p](const Vector& x) { return detail::stanley_rhs(x, p); };
      b.lipschitz = std::sqrt((1.0 + 1.0 / (p.l * p.l)) * (p.v * p.v + p.k * p.k));
      b.default_roi = [] {
        return RegionOfInterest(
            2, BoxShell{detail::vec2(1e-3, 1e-3), detail::vec2(2.0, M_PI / 4.0)});
      };
      b.domain_lo = detail::vec2(-2.0, -M_PI / 4.0);
      b.domain_hi = detail::vec2(2.0, M_PI / 4.0);
      r.push_back(std::move(b));
    }
    return r;
  }();
  return registry;
}

inline const Benchmark* find_benchmark(const std::string& name) {
  for (const auto& b : benchmark_registry())
    if (b.name == name) return &b;
  return nullptr;
}

inline std::shared_ptr<BlackBoxSystem> make_system(
    const Benchmark& b, std::uint64_t sample_budget = kDefaultSampleBudget) {
  return std::make_shared<BlackBoxSystem>(b.dimension, b.dynamics, b.lipschitz,
                                          b.regional, sample_budget);
}

}  // namespace lyacert
