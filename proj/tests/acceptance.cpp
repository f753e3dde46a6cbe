// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criteria 1-3 drive the full engine end to end; 4-6 pin the
// formula values, the property suites, and the cutting-plane progress check.

#include <lyacert/cegis.hpp>
#include <lyacert/report.hpp>
#include <lyacert/verifier.hpp>

#include <chrono>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace lyacert;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
  std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
  if (!detail.empty()) std::cout << "  [" << detail << "]";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

CegisConfig linear_config(int workers) {
  CegisConfig cfg;
  cfg.system_name = "linear_stable";
  cfg.roi = RegionOfInterest(2, Annulus{0.1, 1.0});
  cfg.delta = 1e-4;
  cfg.workers = workers;
  return cfg;
}

CegisConfig negative_config(int workers) {
  CegisConfig cfg;
  cfg.system_name = "linear_unstable";
  cfg.roi = RegionOfInterest(2, Annulus{0.1, 1.0});
  cfg.workers = workers;
  return cfg;
}

CegisConfig vanderpol_config(int workers) {
  CegisConfig cfg;
  cfg.system_name = "vanderpol";
  cfg.roi = RegionOfInterest(2, Annulus{0.2, 1.2});
  cfg.delta = 1e-4;
  cfg.max_k = 40;
  cfg.grid_per_axis = 6;
  cfg.workers = workers;
  return cfg;
}

// --- criterion 1: stable linear system end to end --------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = run(linear_config(1));
  const double secs = seconds_since(t0);

  bool ok = out.kind == OutcomeKind::Found && out.stats.k <= 5 &&
            out.stats.oracle_samples <= 2000 && secs < 30.0;
  std::size_t violations = 1;
  if (ok && out.candidate) {
    const auto val = validate_candidate(*out.candidate, *find_benchmark("linear_stable"),
                                        RegionOfInterest(2, Annulus{0.1, 1.0}), 100000, 0);
    violations = val.violations;
    ok = ok && violations == 0;
  }
  std::ostringstream d;
  d << "outcome=" << outcome_name(out.kind) << " k=" << out.stats.k
    << " oracle=" << out.stats.oracle_samples << " violations=" << violations
    << " time=" << secs << "s";
  report("1 linear system: found, k<=5, <=2000 samples, validator clean", ok, d.str());
}

// --- criterion 2: Van der Pol envelope --------------------------------------

CegisOutcome criterion_2(std::vector<IterationRecord>& trace_out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = run(vanderpol_config(8));
  const double secs = seconds_since(t0);

  bool ok = out.kind == OutcomeKind::Found && out.stats.samples_total <= 25000 &&
            out.stats.simplices <= 50000 && secs < 600.0;
  std::size_t violations = 1;
  if (ok && out.candidate) {
    const auto val = validate_candidate(*out.candidate, *find_benchmark("vanderpol"),
                                        RegionOfInterest(2, Annulus{0.2, 1.2}), 100000, 0);
    violations = val.violations;
    ok = ok && violations == 0;
  }
  std::ostringstream d;
  d << "outcome=" << outcome_name(out.kind) << " k=" << out.stats.k
    << " |S_L|=" << out.stats.samples_learner << " |S|=" << out.stats.samples_total
    << " |C|=" << out.stats.simplices << " violations=" << violations << " time=" << secs
    << "s";
  report("2 Van der Pol: found within 25000 samples / 50000 simplices, validator clean",
         ok, d.str());
  trace_out = out.trace;
  return out;
}

// --- criterion 3: negative test ---------------------------------------------

void criterion_3() {
  const auto out = run(negative_config(1));
  const bool ok = out.kind == OutcomeKind::NoLyapunovInSpace && out.stats.k <= 3 &&
                  out.stats.oracle_samples <= 200;
  std::ostringstream d;
  d << "outcome=" << outcome_name(out.kind) << " k=" << out.stats.k
    << " oracle=" << out.stats.oracle_samples;
  report("3 unstable system: no candidate in space, k<=3, <=200 samples", ok, d.str());
}

// --- criterion 4: formula unit checks ----------------------------------------

bool accpm_inequality(double gamma, int d, long k) {
  const double dd = d;
  return gamma * gamma / d >=
         (0.5 + 2.0 * dd * std::log1p((k + 1.0) / (8.0 * dd * dd))) / (2.0 * dd + k + 1.0);
}

void criterion_4() {
  const bool diam_ok =
      std::abs(compute_diam_threshold(1e-4, 2) - 8.660254037844386e-5) <= 1e-9;

  std::mt19937_64 gen(424242);
  std::uniform_real_distribution<double> g(0.05, 0.9);
  std::uniform_int_distribution<int> dd(1, 10);
  bool minimality_ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const double gamma = g(gen);
    const int d = dd(gen);
    const long k = compute_max_k(gamma, d);
    if (!accpm_inequality(gamma, d, k)) minimality_ok = false;
    if (k > 1 && accpm_inequality(gamma, d, k - 1)) minimality_ok = false;
  }
  report("4 formulas: diameter threshold value and iteration-bound minimality",
         diam_ok && minimality_ok);
}

// --- criterion 5a: upper-bound soundness -------------------------------------

void criterion_5a() {
  std::mt19937_64 gen(11);
  bool ok = true;
  for (const auto& bench : benchmark_registry()) {
    const TemplateKind kind = TemplateKind::quadratic(bench.dimension);
    std::uniform_real_distribution<double> th(-0.5, 0.5);
    for (int trial = 0; trial < 10000 && ok; ++trial) {
      Vector theta(kind.param_dim());
      for (int i = 0; i < kind.param_dim(); ++i) theta[i] = th(gen);
      const Candidate c(kind, theta);
      Vector x(bench.dimension), xb(bench.dimension);
      for (int i = 0; i < bench.dimension; ++i) {
        std::uniform_real_distribution<double> dist(bench.domain_lo[i], bench.domain_hi[i]);
        x[i] = dist(gen);
        xb[i] = dist(gen);
      }
      const Sample s{xb, bench.dynamics(xb)};
      const double lie = gradient_v(c, x).dot(bench.dynamics(x));
      if (lie > lie_upper_bound(c, x, s, bench.lipschitz) + 1e-9) ok = false;
    }
  }
  report("5a Lie upper bound dominates the true Lie derivative (1e4 per benchmark)", ok);
}

// --- criterion 5b: falsifier soundness vs dense probe ------------------------

void criterion_5b() {
  std::mt19937_64 gen(22);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI);
  std::uniform_real_distribution<double> rad(0.25, 1.1);
  std::uniform_real_distribution<double> sz(0.01, 0.1);
  const auto* vdp = find_benchmark("vanderpol");
  const RegionOfInterest roi(2, Annulus{0.2, 1.2});

  int unsat = 0, contradictions = 0, attempts = 0;
  while (unsat < 100 && attempts < 4000) {
    ++attempts;
    const double r = rad(gen), a = ang(gen), h = sz(gen);
    const Vector base = vec2(r * std::cos(a), r * std::sin(a));
    Matrix coords(2, 3);
    coords.col(0) = base;
    coords.col(1) = base + vec2(h, 0.4 * h * (unit(gen) - 0.5));
    coords.col(2) = base + vec2(0.4 * h * (unit(gen) - 0.5), h);

    Vector theta(3);
    theta << 0.2 + 0.25 * unit(gen), 0.15 * (unit(gen) - 0.5), 0.2 + 0.25 * unit(gen);
    RegionalQuery q(Candidate(TemplateKind::quadratic(2), theta), roi);
    q.simplex_coords = coords;
    q.lip = vdp->lipschitz;
    for (int j = 0; j < 3; ++j) {
      const Vector x = coords.col(j);
      q.vertex_samples.push_back({x, vdp->dynamics(x)});
    }
    if (falsify_region(q).kind != VerdictKind::ProvenUnsat) continue;
    ++unsat;

    for (int probe = 0; probe < 1000000; ++probe) {
      double l0 = unit(gen), l1 = unit(gen);
      if (l0 + l1 > 1.0) {
        l0 = 1.0 - l0;
        l1 = 1.0 - l1;
      }
      const Vector x =
          coords.col(0) * l0 + coords.col(1) * l1 + coords.col(2) * (1.0 - l0 - l1);
      if (!roi.contains(x)) continue;
      bool all_nonneg = true;
      for (const auto& s : q.vertex_samples)
        if (lie_upper_bound(q.candidate, x, s, q.lip) < 0.0) {
          all_nonneg = false;
          break;
        }
      if (all_nonneg) {
        ++contradictions;
        break;
      }
    }
  }
  std::ostringstream d;
  d << "unsat_queries=" << unsat << " contradictions=" << contradictions;
  report("5b proven-unsat verdicts uncontradicted by 1e6-point probes (100 queries)",
         unsat == 100 && contradictions == 0, d.str());
}

// --- criterion 5c: Delaunay empty-circumsphere -------------------------------

void criterion_5c() {
  std::mt19937_64 gen(33);
  bool ok = true;
  std::size_t checked = 0;
  for (int n : {2, 3}) {
    for (int inst = 0; inst < 25 && ok; ++inst) {
      std::vector<State> pts;
      for (int mask = 0; mask < (1 << n); ++mask) {
        Vector c(n);
        for (int i = 0; i < n; ++i) c[i] = (mask >> i) & 1 ? 1.0 : -1.0;
        pts.push_back(c);
      }
      std::uniform_real_distribution<double> dist(-1.0, 1.0);
      for (int i = 0; i < 100; ++i) {
        Vector x(n);
        for (int k = 0; k < n; ++k) x[k] = dist(gen);
        pts.push_back(x);
      }
      const Cover cover(pts);
      for (int id : cover.alive_ids()) {
        const auto& s = cover.simplex(id);
        const double r = std::sqrt(s.circumradius2);
        for (const auto& q : cover.points()) {
          ++checked;
          if ((q - s.circumcenter).norm() - r <= -1e-9) ok = false;
        }
      }
    }
  }
  std::ostringstream d;
  d << "point-sphere pairs checked=" << checked;
  report("5c empty circumsphere on 50 random 100-point instances (2D and 3D)", ok,
         d.str());
}

// --- criterion 5d: analytic center closed form -------------------------------

void criterion_5d() {
  CompatibilityPolytope p(1);
  p.add_hypercube_rows();
  Vector one(1);
  one << 1.0;
  p.add_row(one, 0.0);
  const auto lp = strict_feasibility(p);
  bool ok = lp.feasible;
  double value = 0.0;
  if (ok) {
    value = analytic_center(p, lp.interior)[0];
    ok = std::abs(value - (-1.0 / (2.0 * std::sqrt(3.0)))) <= 1e-6;
  }
  std::ostringstream d;
  d << "center=" << value;
  report("5d analytic center matches -1/(2 sqrt(3)) in the 1-d closed form", ok, d.str());
}

// --- criterion 5e: feature-map linearity -------------------------------------

void criterion_5e() {
  std::mt19937_64 gen(55);
  std::uniform_real_distribution<double> th(-0.5, 0.5);
  std::uniform_real_distribution<double> xs(-2.0, 2.0);
  bool ok = true;
  for (int trial = 0; trial < 10000 && ok; ++trial) {
    const int n = (trial % 2) ? 2 : 3;
    const TemplateKind kind =
        (trial % 4 < 2) ? TemplateKind::quadratic(n) : TemplateKind::tanh_quadratic(n);
    Vector theta(kind.param_dim());
    for (int i = 0; i < kind.param_dim(); ++i) theta[i] = th(gen);
    const Candidate c(kind, theta);
    Vector x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = xs(gen);
      y[i] = xs(gen);
    }
    const double v = evaluate_v(c, x);
    const double v_phi = v_features(kind, x).dot(theta);
    if (std::abs(v_phi - v) > 1e-12 * std::max(1.0, std::abs(v))) ok = false;
    const double lie = gradient_v(c, x).dot(y);
    const double lie_psi = lie_features(kind, x, y).dot(theta);
    if (std::abs(lie_psi - lie) > 1e-12 * std::max(1.0, std::abs(lie))) ok = false;
  }
  report("5e feature maps reconstruct V and the Lie form to 1e-12 (1e4 inputs)", ok);
}

// --- criterion 5f: parallel determinism --------------------------------------

void criterion_5f() {
  const auto report_string = [](const CegisConfig& cfg) {
    const auto out = run(cfg);
    return to_json(build_report(cfg, out, /*include_timing=*/false)).dump();
  };
  const std::string lin1 = report_string(linear_config(1));
  const std::string lin8 = report_string(linear_config(8));
  const std::string neg1 = report_string(negative_config(1));
  const std::string neg8 = report_string(negative_config(8));
  const bool ok = lin1 == lin8 && neg1 == neg8;
  report("5f one-worker and eight-worker reports are byte-identical", ok);
}

// --- criterion 6: cutting-plane progress -------------------------------------

void criterion_6(const std::vector<IterationRecord>& trace) {
  bool ok = true;
  std::size_t falsified = 0;
  const TemplateKind kind = TemplateKind::quadratic(2);
  for (const auto& rec : trace) {
    if (rec.true_falsifiers.empty()) continue;
    ++falsified;
    bool cut = false;
    for (const auto& s : rec.true_falsifiers) {
      CompatibilityPolytope p(kind.param_dim());
      p.add_sample_rows(kind, s);
      for (const auto& row : p.rows())
        if (row.normal.dot(rec.theta) >= row.offset) cut = true;
    }
    if (!cut) ok = false;
  }
  std::ostringstream d;
  d << "falsified_candidates=" << falsified
    << (falsified == 0 ? " (none; vacuously true)" : "");
  report("6 every falsified candidate violates a halfspace of the next polytope", ok,
         d.str());
}

}  // namespace

int main() {
  std::cout << "acceptance criteria\n-------------------\n";
  criterion_1();
  std::vector<IterationRecord> vdp_trace;
  criterion_2(vdp_trace);
  criterion_3();
  criterion_4();
  criterion_5a();
  criterion_5b();
  criterion_5c();
  criterion_5d();
  criterion_5e();
  criterion_5f();
  criterion_6(vdp_trace);
  std::cout << "-------------------\n"
            << (g_failures == 0 ? "all criteria passed" : "criteria failed") << "\n";
  return g_failures == 0 ? 0 : 1;
}
