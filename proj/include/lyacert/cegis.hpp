#pragma once

// The learn-cover-verify-refine driver.
//
// Each iteration proposes the analytic-center candidate for the samples seen
// inside the region of interest, then drives the regional verifier over the
// triangulated cover. Counterexample and centroid states are sampled and
// inserted into the cover; the refinement loop leaves only when a new sample
// genuinely falsifies the candidate (either Lyapunov condition fails at the
// sample). Four terminal outcomes mirror the synthesis contract: a certified
// candidate, provable absence of a compatible candidate, a candidate that is
// neither delta-provable nor falsified, and the iteration limit. Resource
// exhaustion (oracle budget or wall clock) is reported separately with the
// best candidate so far.

#include <lyacert/delaunay.hpp>
#include <lyacert/learner.hpp>
#include <lyacert/system.hpp>
#include <lyacert/templates.hpp>
#include <lyacert/verifier.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lyacert {

/// Largest simplex diameter at which a failed region proves the candidate is
/// not delta-provable: (delta/2) sqrt(2(n+1)/n).
inline double compute_diam_threshold(double delta, int n) {
  if (!(delta > 0.0) || n < 1)
    throw std::invalid_argument("compute_diam_threshold: need delta > 0 and n >= 1");
  return 0.5 * delta * std::sqrt(2.0 * (n + 1) / static_cast<double>(n));
}

/// Minimal cutting-plane iteration count k such that
/// gamma^2/d >= (1/2 + 2d ln(1 + (k+1)/(8d^2))) / (2d + k + 1).
inline long compute_max_k(double gamma, int d) {
  if (!(gamma > 0.0 && gamma < 1.0) || d < 1)
    throw std::invalid_argument("compute_max_k: need 0 < gamma < 1 and d >= 1");
  const double target = gamma * gamma / d;
  const double dd = d;
  for (long k = 1; k <= 1000000000L; ++k) {
    const double rhs =
        (0.5 + 2.0 * dd * std::log1p((k + 1.0) / (8.0 * dd * dd))) / (2.0 * dd + k + 1.0);
    if (target >= rhs) return k;
  }
  throw NumericalFailure("compute_max_k: iteration bound exceeds 1e9");
}

struct CegisConfig {
  std::string system_name;
  std::optional<RegionOfInterest> roi;  // default: the benchmark's region
  TemplateFamily template_family = TemplateFamily::Quadratic;
  double delta = 1e-4;
  std::optional<double> gamma;   // mutually exclusive with max_k
  std::optional<long> max_k;     // defaults to 40 when gamma is unset
  int grid_per_axis = 6;
  std::uint64_t sample_budget = kDefaultSampleBudget;
  int verifier_splits = 2000;
  int workers = 1;
  std::uint64_t seed = 0;        // validation sampling only; the run is deterministic
  double wall_clock_seconds = 0.0;  // 0 = unlimited

  long iteration_limit(int param_dim) const {
    if (gamma && max_k)
      throw std::invalid_argument("config: gamma and max_k are mutually exclusive");
    if (gamma) return compute_max_k(*gamma, param_dim);
    return max_k.value_or(40);
  }
};

enum class OutcomeKind {
  Found,
  NoLyapunovInSpace,
  NotDeltaProvable,
  IterationLimit,
  ResourceLimit
};

inline const char* outcome_name(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Found: return "found";
    case OutcomeKind::NoLyapunovInSpace: return "no_lyapunov_in_space";
    case OutcomeKind::NotDeltaProvable: return "not_delta_provable";
    case OutcomeKind::IterationLimit: return "iteration_limit";
    case OutcomeKind::ResourceLimit: return "resource_limit";
  }
  return "unknown";
}

struct IterationRecord {
  long k = 0;
  Vector theta;
  int inner_passes = 0;
  std::size_t regions_verified = 0;
  std::size_t cache_hits = 0;
  std::size_t counterexamples = 0;          // sampled refinement/witness states
  std::vector<Sample> true_falsifiers;      // samples that ended this candidate
};

struct CegisStats {
  long k = 0;                   // iterations entered
  std::size_t samples_learner = 0;   // |S_L| at the last learner call
  std::size_t samples_total = 0;     // |S|
  std::size_t simplices = 0;         // |C|
  double seconds = 0.0;
  std::uint64_t oracle_samples = 0;
};

struct CegisOutcome {
  OutcomeKind kind = OutcomeKind::IterationLimit;
  std::optional<Candidate> candidate;
  CegisStats stats;
  std::vector<IterationRecord> trace;
};

namespace detail {

inline std::vector<State> grid_states(const RegionOfInterest& roi, int per_axis) {
  Vector lo, hi;
  roi.bounding_box(lo, hi);
  const int n = roi.dimension();
  std::vector<State> out;
  std::vector<int> idx(static_cast<size_t>(n), 0);
  while (true) {
    Vector x(n);
    for (int i = 0; i < n; ++i)
      x[i] = lo[i] + (hi[i] - lo[i]) * idx[static_cast<size_t>(i)] / (per_axis - 1);
    out.push_back(x);
    int k = 0;
    while (k < n && idx[static_cast<size_t>(k)] == per_axis - 1) {
      idx[static_cast<size_t>(k)] = 0;
      ++k;
    }
    if (k == n) break;
    ++idx[static_cast<size_t>(k)];
  }
  return out;
}

}  // namespace detail

/// Outcome plus the final cover and sample store (for artifact export).
struct RunArtifacts {
  CegisOutcome outcome;
  std::optional<Cover> cover;
  std::vector<Sample> samples;
};

/// Run the full synthesis loop for a registered benchmark.
inline RunArtifacts run_with_artifacts(const CegisConfig& cfg,
                                       std::ostream* verdict_trace = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto seconds_elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const Benchmark* bench = find_benchmark(cfg.system_name);
  if (!bench) throw std::invalid_argument("unknown system: " + cfg.system_name);
  const RegionOfInterest roi = cfg.roi ? *cfg.roi : bench->default_roi();
  if (roi.dimension() != bench->dimension)
    throw std::invalid_argument("config: roi dimension does not match the system");
  if (cfg.grid_per_axis < 2)
    throw std::invalid_argument("config: grid_per_axis must be at least 2");
  const TemplateKind kind{cfg.template_family, bench->dimension};
  const long max_k = cfg.iteration_limit(kind.param_dim());
  const double diam_thres = compute_diam_threshold(cfg.delta, bench->dimension);
  const auto system = make_system(*bench, cfg.sample_budget);

  CegisOutcome out;
  const auto finish = [&](OutcomeKind k, std::optional<Candidate> cand, long iter,
                          std::size_t s_l, std::optional<Cover>&& cover,
                          std::vector<Sample>&& samples) {
    out.kind = k;
    out.candidate = std::move(cand);
    out.stats.k = iter;
    out.stats.samples_learner = s_l;
    out.stats.samples_total = samples.size();
    out.stats.simplices = cover ? cover->num_alive() : 0;
    out.stats.seconds = seconds_elapsed();
    out.stats.oracle_samples = system->samples_used();
    RunArtifacts art;
    art.outcome = std::move(out);
    art.cover = std::move(cover);
    art.samples = std::move(samples);
    return art;
  };

  // Initial dataset: evenly spaced grid over the bounding box of the region
  // (its corners are grid points), sampled through the budgeted oracle.
  std::vector<Sample> samples;
  std::optional<Cover> cover;
  try {
    cover.emplace(detail::grid_states(roi, cfg.grid_per_axis));
    samples.reserve(cover->points().size());
    for (const auto& p : cover->points()) samples.push_back({p, system->evaluate(p)});
  } catch (const SampleBudgetExhausted&) {
    return finish(OutcomeKind::ResourceLimit, std::nullopt, 0, 0, std::move(cover), std::move(samples));
  }

  Verifier verifier(cfg.workers);
  const VerifyBudget vbudget{cfg.verifier_splits};
  std::optional<Candidate> last_candidate;
  std::size_t last_sl = 0;

  for (long k = 1; k <= max_k; ++k) {
    std::vector<Sample> in_roi;
    for (const auto& s : samples)
      if (roi.contains(s.x)) in_roi.push_back(s);
    last_sl = in_roi.size();

    const auto candidate = propose(in_roi, kind);
    if (!candidate)
      return finish(OutcomeKind::NoLyapunovInSpace, std::nullopt, k, last_sl,
                    std::move(cover), std::move(samples));
    last_candidate = candidate;
    verifier.begin_candidate();

    IterationRecord rec;
    rec.k = k;
    rec.theta = candidate->theta;

    bool stop_refine = false;
    bool candidate_falsified = false;
    while (!candidate_falsified) {
      if (stop_refine) {
        out.trace.push_back(std::move(rec));
        return finish(OutcomeKind::NotDeltaProvable, candidate, k, last_sl, std::move(cover),
                      std::move(samples));
      }
      if (cfg.wall_clock_seconds > 0.0 && seconds_elapsed() > cfg.wall_clock_seconds) {
        out.trace.push_back(std::move(rec));
        return finish(OutcomeKind::ResourceLimit, candidate, k, last_sl, std::move(cover),
                      std::move(samples));
      }

      VerifyResult vres;
      try {
        vres = verifier.verify_candidate(*candidate, *cover, samples, roi, *system,
                                         diam_thres, vbudget, verdict_trace);
      } catch (const SampleBudgetExhausted&) {
        out.trace.push_back(std::move(rec));
        return finish(OutcomeKind::ResourceLimit, candidate, k, last_sl, std::move(cover),
                      std::move(samples));
      }
      ++rec.inner_passes;
      rec.regions_verified += vres.stats.regions_verified;
      rec.cache_hits += vres.stats.cache_hits;
      rec.counterexamples += vres.new_states.size();
      if (vres.any_small_region_failed) stop_refine = true;

      bool all_unsat = true;
      for (const auto& [id, v] : vres.verdicts)
        if (v.kind != VerdictKind::ProvenUnsat) all_unsat = false;

      if (all_unsat) {
        // Decrease holds everywhere; certify positivity before reporting.
        const auto pos = positivity_certificate(*candidate, roi);
        if (pos.status == PositivityStatus::Certified) {
          out.trace.push_back(std::move(rec));
          return finish(OutcomeKind::Found, candidate, k, last_sl, std::move(cover), std::move(samples));
        }
        if (pos.status == PositivityStatus::Counterexample) {
          // V <= 0 at the state: a genuine falsifier; learn from it.
          try {
            const State y = system->evaluate(pos.counterexample);
            if (cover->find_point(pos.counterexample) < 0) {
              cover->insert_points({pos.counterexample});
              samples.push_back({pos.counterexample, y});
              rec.true_falsifiers.push_back(samples.back());
            }
          } catch (const SampleBudgetExhausted&) {
            out.trace.push_back(std::move(rec));
            return finish(OutcomeKind::ResourceLimit, candidate, k, last_sl, std::move(cover),
                          std::move(samples));
          }
          candidate_falsified = true;
          break;
        }
        // Positivity check ran out of budget: the candidate cannot be
        // certified and no counterexample drives refinement.
        out.trace.push_back(std::move(rec));
        return finish(OutcomeKind::ResourceLimit, candidate, k, last_sl, std::move(cover),
                      std::move(samples));
      }

      if (vres.new_states.empty()) {
        // Failed regions exist but every proposed state is an existing
        // vertex: refinement cannot make progress (sub-threshold geometry).
        stop_refine = true;
        continue;
      }

      // Keep the sample store aligned with the cover's point ids; a state
      // within duplicate tolerance of an existing vertex is dropped by the
      // cover and must not enter the store either.
      for (const auto& s : vres.new_samples) {
        if (cover->find_point(s.x) >= 0) continue;
        cover->insert_points({s.x});
        samples.push_back(s);
      }

      if (vres.falsified) {
        for (const auto& s : vres.new_samples)
          if (roi.contains(s.x) &&
              classify_counterexample(*candidate, s.x, s.y) ==
                  CounterexampleClass::TrueCounterexample)
            rec.true_falsifiers.push_back(s);
        candidate_falsified = true;
      }
    }
    out.trace.push_back(std::move(rec));
  }

  return finish(OutcomeKind::IterationLimit, last_candidate, max_k, last_sl, std::move(cover),
                std::move(samples));
}

inline CegisOutcome run(const CegisConfig& cfg, std::ostream* verdict_trace = nullptr) {
  return run_with_artifacts(cfg, verdict_trace).outcome;
}

}  // namespace lyacert
