#include <catch2/catch_amalgamated.hpp>

#include <lyacert/verifier.hpp>

#include "testutil.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace lyacert;
using testutil::vec2;

namespace {

Candidate quad2(double a, double b, double c) {
  Vector t(3);
  t << a, b, c;
  return Candidate(TemplateKind::quadratic(2), t);
}

Matrix triangle(const Vector& a, const Vector& b, const Vector& c) {
  Matrix m(2, 3);
  m.col(0) = a;
  m.col(1) = b;
  m.col(2) = c;
  return m;
}

RegionalQuery make_query(const Benchmark& bench, const Candidate& cand, Matrix coords,
                         const RegionOfInterest& roi, int max_splits = 2000) {
  RegionalQuery q(cand, roi);
  q.simplex_coords = std::move(coords);
  q.max_splits = max_splits;
  q.lip = bench.lipschitz;
  for (int j = 0; j < q.simplex_coords.cols(); ++j) {
    const Vector x = q.simplex_coords.col(j);
    q.vertex_samples.push_back({x, bench.dynamics(x)});
  }
  double d = 0.0;
  for (int a = 0; a < q.simplex_coords.cols(); ++a)
    for (int b = a + 1; b < q.simplex_coords.cols(); ++b)
      d = std::max(d, (q.simplex_coords.col(a) - q.simplex_coords.col(b)).norm());
  q.simplex_diameter = d;
  return q;
}

// Dense barycentric grid over a triangle.
std::vector<Vector> triangle_grid(const Matrix& coords, int per_axis) {
  std::vector<Vector> pts;
  for (int i = 0; i <= per_axis; ++i) {
    for (int j = 0; j + i <= per_axis; ++j) {
      const double l0 = static_cast<double>(i) / per_axis;
      const double l1 = static_cast<double>(j) / per_axis;
      const double l2 = 1.0 - l0 - l1;
      pts.push_back(l0 * coords.col(0) + l1 * coords.col(1) + l2 * coords.col(2));
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("sample-based Lie upper bound") {
  const Candidate c = quad2(1, 0, 1);

  // Zero distance: the bound reduces to grad V . y.
  const Sample at_x{vec2(0.7, -0.2), vec2(0.3, 0.4)};
  REQUIRE(lie_upper_bound(c, at_x.x, at_x, 4.632) ==
          Catch::Approx(vec2(0.7, -0.2).dot(vec2(0.3, 0.4))));

  // Direct arithmetic: |grad| L |x - xbar| + grad . ybar at x = (0.5, 0.5).
  const Sample far{vec2(1, 0), vec2(0, 1)};
  const double expect = std::sqrt(0.5) * 4.632 * std::sqrt(0.5) + 0.5;
  REQUIRE(lie_upper_bound(c, vec2(0.5, 0.5), far, 4.632) == Catch::Approx(expect));
  REQUIRE(expect == Catch::Approx(2.816).epsilon(1e-3));

  // Zero output: the bound is a product of norms.
  const Sample zero{vec2(1, 0), vec2(0, 0)};
  REQUIRE(lie_upper_bound(c, vec2(0.3, 0.8), zero, 2.0) >= 0.0);
}

TEST_CASE("falsifier proves decrease on a small stable simplex") {
  const auto* lin = find_benchmark("linear_stable");
  const RegionOfInterest roi(2, Annulus{0.1, 1.0});
  const Matrix coords = triangle(vec2(0.5, 0), vec2(0.51, 0), vec2(0.5, 0.01));
  const auto q = make_query(*lin, quad2(1, 0, 1), coords, roi);
  const Verdict v = falsify_region(q);
  REQUIRE(v.kind == VerdictKind::ProvenUnsat);

  // Grid cross-check: every simplex state in the region has some vertex bound
  // strictly negative, so no falsifying assignment exists.
  for (const auto& x : triangle_grid(coords, 60)) {
    if (!roi.contains(x)) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : q.vertex_samples)
      best = std::min(best, lie_upper_bound(q.candidate, x, s, q.lip));
    REQUIRE(best < 0.0);
  }
}

TEST_CASE("falsifier finds a verified witness on an unstable system") {
  const auto* lin = find_benchmark("linear_unstable");
  const RegionOfInterest roi(2, Annulus{0.1, 1.2});
  const Matrix coords = triangle(vec2(0.95, -0.05), vec2(1.05, -0.05), vec2(1.0, 0.08));
  const auto q = make_query(*lin, quad2(1, 0, 1), coords, roi);
  const Verdict v = falsify_region(q);
  REQUIRE(v.kind == VerdictKind::Falsified);
  REQUIRE(v.states.size() == 1);
  const State& w = v.states[0];

  REQUIRE(roi.contains(w));
  for (const auto& s : q.vertex_samples)
    REQUIRE(lie_upper_bound(q.candidate, w, s, q.lip) >= -1e-12);
  // Witness lies in the simplex (barycentric coordinates within tolerance).
  Matrix a(2, 2);
  a.col(0) = coords.col(0) - coords.col(2);
  a.col(1) = coords.col(1) - coords.col(2);
  const Vector l01 = a.partialPivLu().solve(w - coords.col(2));
  REQUIRE(l01.minCoeff() >= -1e-12);
  REQUIRE(l01.sum() <= 1.0 + 1e-12);
}

TEST_CASE("zero split budget yields the centroid for refinement") {
  const auto* lin = find_benchmark("linear_stable");
  const RegionOfInterest roi(2, Annulus{0.1, 1.0});
  const Matrix coords = triangle(vec2(0.5, 0), vec2(0.51, 0), vec2(0.5, 0.01));
  const auto q = make_query(*lin, quad2(1, 0, 1), coords, roi, 0);
  const Verdict v = falsify_region(q);
  REQUIRE(v.kind == VerdictKind::Unknown);
  const Vector c = (vec2(0.5, 0) + vec2(0.51, 0) + vec2(0.5, 0.01)) / 3.0;
  REQUIRE((v.centroid - c).norm() <= 1e-15);
}

TEST_CASE("counterexample classification") {
  const Candidate id = quad2(1, 0, 1);
  // Unstable flow: grad V . y = 1 >= 0.
  REQUIRE(classify_counterexample(id, vec2(1, 0), vec2(1, 0)) ==
          CounterexampleClass::TrueCounterexample);
  // Stable flow with positive V: refinement only.
  REQUIRE(classify_counterexample(id, vec2(1, 0), vec2(-1, 0)) ==
          CounterexampleClass::RefinementOnly);
  // Indefinite candidate: V <= 0 at the state.
  REQUIRE(classify_counterexample(quad2(1, 0, -1), vec2(0, 1), vec2(0, -1)) ==
          CounterexampleClass::TrueCounterexample);
}

namespace {

// Engine-shaped fixture: grid-seeded cover and aligned per-point samples.
struct Fixture {
  Fixture(const std::string& bench_name, const RegionOfInterest& roi_in, int per_axis)
      : bench(*find_benchmark(bench_name)), roi(roi_in), system(make_system(bench)) {
    Vector lo, hi;
    roi.bounding_box(lo, hi);
    std::vector<State> seeds;
    for (int i = 0; i < per_axis; ++i)
      for (int j = 0; j < per_axis; ++j) {
        Vector x(2);
        x[0] = lo[0] + (hi[0] - lo[0]) * i / (per_axis - 1);
        x[1] = lo[1] + (hi[1] - lo[1]) * j / (per_axis - 1);
        seeds.push_back(x);
      }
    cover.emplace(seeds);
    for (const auto& p : cover->points()) samples.push_back({p, system->evaluate(p)});
  }

  const Benchmark& bench;
  RegionOfInterest roi;
  std::shared_ptr<BlackBoxSystem> system;
  std::optional<Cover> cover;
  std::vector<Sample> samples;
};

}  // namespace

TEST_CASE("verify_candidate: clean pass, cache reuse, and falsification") {
  const double diam_thres = 8.66e-5;

  SECTION("stable system with a fine cover proves every region") {
    Fixture f("linear_stable", RegionOfInterest(2, Annulus{0.5, 0.85}), 17);
    Verifier verifier(2);
    verifier.begin_candidate();
    auto r1 = verifier.verify_candidate(quad2(1, 0, 1), *f.cover, f.samples, f.roi,
                                        *f.system, diam_thres);
    REQUIRE(r1.new_states.empty());
    REQUIRE_FALSE(r1.falsified);
    REQUIRE(r1.stats.regions_verified > 0);

    // Identical candidate, unchanged cover: the cache answers everything.
    auto r2 = verifier.verify_candidate(quad2(1, 0, 1), *f.cover, f.samples, f.roi,
                                        *f.system, diam_thres);
    REQUIRE(r2.stats.regions_verified == 0);
    REQUIRE(r2.stats.cache_hits == r2.stats.regions_considered);
    REQUIRE_FALSE(r2.falsified);

    // A new candidate invalidates the cache.
    verifier.begin_candidate();
    auto r3 = verifier.verify_candidate(quad2(1, 0, 1), *f.cover, f.samples, f.roi,
                                        *f.system, diam_thres);
    REQUIRE(r3.stats.cache_hits == 0);
  }

  SECTION("unstable system is falsified with a true counterexample") {
    Fixture f("linear_unstable", RegionOfInterest(2, Annulus{0.3, 0.9}), 7);
    Verifier verifier(2);
    verifier.begin_candidate();
    auto r = verifier.verify_candidate(quad2(1, 0, 1), *f.cover, f.samples, f.roi,
                                       *f.system, diam_thres);
    REQUIRE(r.falsified);
    REQUIRE(!r.new_states.empty());
    bool found_true = false;
    for (const auto& s : r.new_samples)
      if (f.roi.contains(s.x) &&
          classify_counterexample(quad2(1, 0, 1), s.x, s.y) ==
              CounterexampleClass::TrueCounterexample)
        found_true = true;
    REQUIRE(found_true);
    // New states arrive sorted and unique.
    for (std::size_t i = 1; i < r.new_states.size(); ++i)
      REQUIRE(lex_less(r.new_states[i - 1], r.new_states[i]));
  }
}

TEST_CASE("worker count does not change the outcome") {
  Fixture f("vanderpol", RegionOfInterest(2, Annulus{0.2, 1.2}), 8);
  const Candidate cand = quad2(0.4, 0.05, 0.3);

  Verifier v1(1), v8(8);
  v1.begin_candidate();
  v8.begin_candidate();
  const auto r1 =
      v1.verify_candidate(cand, *f.cover, f.samples, f.roi, *f.system, 8.66e-5);
  const auto r8 =
      v8.verify_candidate(cand, *f.cover, f.samples, f.roi, *f.system, 8.66e-5);

  REQUIRE(r1.new_states.size() == r8.new_states.size());
  for (std::size_t i = 0; i < r1.new_states.size(); ++i)
    REQUIRE(exactly_equal(r1.new_states[i], r8.new_states[i]));
  REQUIRE(r1.falsified == r8.falsified);
}

TEST_CASE("upper-bound soundness against white-box dynamics") {
  auto gen = testutil::rng(4242);
  for (const auto& bench : benchmark_registry()) {
    const TemplateKind kind = TemplateKind::quadratic(bench.dimension);
    for (int trial = 0; trial < 10000; ++trial) {
      const Candidate c(kind, testutil::random_vector(gen, kind.param_dim(), -0.5, 0.5));
      const Vector x = testutil::random_in_box(gen, bench.domain_lo, bench.domain_hi);
      const Vector xbar = testutil::random_in_box(gen, bench.domain_lo, bench.domain_hi);
      const Sample s{xbar, bench.dynamics(xbar)};
      const double lie = gradient_v(c, x).dot(bench.dynamics(x));
      REQUIRE(lie <= lie_upper_bound(c, x, s, bench.lipschitz) + 1e-9);
    }
  }
}

TEST_CASE("proven-unsat verdicts survive a dense random probe") {
  auto gen = testutil::rng(90210);
  const auto* vdp = find_benchmark("vanderpol");
  const RegionOfInterest roi(2, Annulus{0.2, 1.2});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI);
  std::uniform_real_distribution<double> rad(0.25, 1.1);
  std::uniform_real_distribution<double> sz(0.01, 0.08);

  int unsat_seen = 0;
  for (int inst = 0; inst < 40 && unsat_seen < 20; ++inst) {
    const double r = rad(gen), a = ang(gen), h = sz(gen);
    const Vector base = vec2(r * std::cos(a), r * std::sin(a));
    const Matrix coords =
        triangle(base, base + vec2(h, 0.3 * h), base + vec2(-0.2 * h, h));
    Vector t(3);
    t << 0.25 + 0.2 * unit(gen), 0.1 * (unit(gen) - 0.5), 0.25 + 0.2 * unit(gen);
    const auto q = make_query(*vdp, Candidate(TemplateKind::quadratic(2), t), coords, roi);
    if (falsify_region(q).kind != VerdictKind::ProvenUnsat) continue;
    ++unsat_seen;

    for (int probe = 0; probe < 100000; ++probe) {
      double l0 = unit(gen), l1 = unit(gen);
      if (l0 + l1 > 1.0) {
        l0 = 1.0 - l0;
        l1 = 1.0 - l1;
      }
      const Vector x =
          coords.col(0) * l0 + coords.col(1) * l1 + coords.col(2) * (1.0 - l0 - l1);
      if (!roi.contains(x)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& s : q.vertex_samples)
        best = std::min(best, lie_upper_bound(q.candidate, x, s, q.lip));
      REQUIRE(best < 0.0);
    }
  }
  REQUIRE(unsat_seen >= 10);
}

TEST_CASE("adding a witness sample preserves proven decrease") {
  auto gen = testutil::rng(777);
  const auto* vdp = find_benchmark("vanderpol");
  const RegionOfInterest roi(2, Annulus{0.2, 1.2});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI);
  std::uniform_real_distribution<double> rad(0.3, 1.0);

  int compared = 0;
  for (int inst = 0; inst < 60 && compared < 15; ++inst) {
    const double r = rad(gen), a = ang(gen), h = 0.02 + 0.05 * unit(gen);
    const Vector base = vec2(r * std::cos(a), r * std::sin(a));
    const Matrix coords = triangle(base, base + vec2(h, 0), base + vec2(0, h));
    Vector t(3);
    t << 0.3, 0.05 * (unit(gen) - 0.5), 0.3;
    auto full = make_query(*vdp, Candidate(TemplateKind::quadratic(2), t), coords, roi);

    auto reduced = full;
    reduced.vertex_samples.pop_back();
    if (falsify_region(reduced).kind != VerdictKind::ProvenUnsat) continue;
    ++compared;
    REQUIRE(falsify_region(full).kind == VerdictKind::ProvenUnsat);
  }
  REQUIRE(compared >= 5);
}

TEST_CASE("verdict trace emits one record per region") {
  Fixture f("linear_stable", RegionOfInterest(2, Annulus{0.5, 0.85}), 9);
  Verifier verifier(1);
  verifier.begin_candidate();
  std::ostringstream trace;
  const auto r = verifier.verify_candidate(quad2(1, 0, 1), *f.cover, f.samples, f.roi,
                                           *f.system, 8.66e-5, {}, &trace);
  std::size_t lines = 0;
  for (char ch : trace.str())
    if (ch == '\n') ++lines;
  REQUIRE(lines == r.stats.regions_considered);
  REQUIRE(trace.str().find("proven_unsat") != std::string::npos);
}
