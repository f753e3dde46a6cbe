#pragma once

// Per-simplex falsification of the regional decrease condition.
//
// For a simplex R with vertex samples (x_j, y_j) and regional Lipschitz
// bound L_R, a candidate V fails to be provably decreasing on R only if some
// state x in R (and in the region of interest) satisfies every per-vertex
// bound
//     |grad V(x)| L_R |x - x_j| + grad V(x) . y_j >= 0.
// The falsifier searches for such a state by interval branch and bound over
// barycentric coordinates: a box is discarded once it provably leaves the
// region of interest or once a single vertex bound is provably negative on
// it (one negative upper bound is enough to prove decrease there); a box
// midpoint whose constraints certify nonnegative with outward-rounded
// arithmetic is returned as a verified witness. Exhausting the boxes proves
// the condition on the whole simplex; exhausting the split budget returns
// the simplex centroid for refinement.

#include <lyacert/delaunay.hpp>
#include <lyacert/interval.hpp>
#include <lyacert/linalg.hpp>
#include <lyacert/system.hpp>
#include <lyacert/templates.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <ostream>
#include <thread>
#include <unordered_set>
#include <vector>

namespace lyacert {

/// Sample-based upper bound on the Lie derivative at x (valid whenever lip is
/// a Lipschitz bound on a region containing both x and the sample state).
inline double lie_upper_bound(const Candidate& c, const State& x, const Sample& sample,
                              double lip) {
  const Vector g = gradient_v(c, x);
  return g.norm() * lip * (x - sample.x).norm() + g.dot(sample.y);
}

enum class VerdictKind { ProvenUnsat, Falsified, Unknown };

struct Verdict {
  VerdictKind kind = VerdictKind::Unknown;
  std::vector<State> states;  // verified witnesses (Falsified)
  State centroid;             // refinement point (Unknown)
  int splits_used = 0;
};

struct RegionalQuery {
  Candidate candidate;
  Matrix simplex_coords;  // n x (n+1) snapshot of the simplex vertices
  std::uint64_t simplex_stamp = 0;
  double simplex_diameter = 0.0;
  std::vector<Sample> vertex_samples;  // witness set; the simplex vertices
  double lip = 0.0;
  RegionOfInterest roi;
  int max_splits = 2000;

  RegionalQuery(Candidate c, RegionOfInterest r)
      : candidate(std::move(c)), roi(std::move(r)) {}
};

namespace detail {

struct LieBoundTerms {
  Interval grad_norm;
  std::vector<Interval> grad;
};

inline LieBoundTerms lie_terms(const Candidate& c, const std::vector<Interval>& x) {
  LieBoundTerms t;
  t.grad = interval_gradient_v(c, x);
  Interval sq(0.0);
  for (const auto& g : t.grad) sq = sq + square(g);
  t.grad_norm = interval_sqrt(sq);
  return t;
}

inline Interval lie_upper_bound_interval(const LieBoundTerms& t,
                                         const std::vector<Interval>& x,
                                         const Sample& s, double lip) {
  Interval dist_sq(0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    dist_sq = dist_sq + square(x[i] - Interval(s.x[static_cast<Eigen::Index>(i)]));
  Interval acc = t.grad_norm * Interval(lip) * interval_sqrt(dist_sq);
  for (std::size_t i = 0; i < x.size(); ++i)
    acc = acc + t.grad[i] * Interval(s.y[static_cast<Eigen::Index>(i)]);
  return acc;
}

}  // namespace detail

/// Interval branch-and-bound falsification of the regional condition on one
/// simplex. Sound in both directions: ProvenUnsat means no falsifying state
/// exists in simplex-and-region; Falsified witnesses re-check under outward
/// rounding.
inline Verdict falsify_region(const RegionalQuery& q) {
  const int n = static_cast<int>(q.simplex_coords.rows());
  Verdict verdict;
  verdict.centroid = q.simplex_coords.rowwise().mean();
  if (q.max_splits <= 0) {
    verdict.kind = VerdictKind::Unknown;
    return verdict;
  }

  const Vector last = q.simplex_coords.col(n);
  // Reduced barycentric box: lambda_0..lambda_{n-1} free, lambda_n eliminated.
  std::vector<std::vector<Interval>> stack;
  stack.emplace_back(static_cast<size_t>(n), Interval(0.0, 1.0));

  int splits = 0;
  std::vector<Interval> x(static_cast<size_t>(n));
  while (!stack.empty()) {
    std::vector<Interval> box = std::move(stack.back());
    stack.pop_back();

    Interval sum(0.0);
    for (const auto& b : box) sum = sum + b;
    const Interval lambda_last = Interval(1.0) - sum;
    if (lambda_last.hi < 0.0) continue;

    for (int i = 0; i < n; ++i) {
      Interval acc(last[i]);
      for (int j = 0; j < n; ++j)
        acc = acc + box[static_cast<size_t>(j)] *
                        Interval(q.simplex_coords(i, j) - last[i]);
      x[static_cast<size_t>(i)] = acc;
    }

    if (q.roi.certainly_outside(x)) continue;

    const auto terms = detail::lie_terms(q.candidate, x);
    bool discarded = false;
    for (const auto& s : q.vertex_samples) {
      if (detail::lie_upper_bound_interval(terms, x, s, q.lip).hi < 0.0) {
        discarded = true;
        break;
      }
    }
    if (discarded) continue;

    // Witness attempt: project the box midpoint onto the simplex and certify
    // with point intervals.
    {
      Vector lambda(n + 1);
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        lambda[j] = std::max(box[static_cast<size_t>(j)].mid(), 0.0);
        s += lambda[j];
      }
      lambda[n] = std::max(1.0 - s, 0.0);
      lambda /= lambda.sum();
      const Vector cand_x = q.simplex_coords * lambda;

      std::vector<Interval> px(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) px[static_cast<size_t>(i)] = Interval(cand_x[i]);
      if (q.roi.certainly_inside(px)) {
        const auto pt = detail::lie_terms(q.candidate, px);
        bool all_nonneg = true;
        for (const auto& smp : q.vertex_samples) {
          if (detail::lie_upper_bound_interval(pt, px, smp, q.lip).lo < 0.0) {
            all_nonneg = false;
            break;
          }
        }
        if (all_nonneg) {
          verdict.kind = VerdictKind::Falsified;
          verdict.states.push_back(cand_x);
          verdict.splits_used = splits;
          return verdict;
        }
      }
    }

    if (splits >= q.max_splits) {
      verdict.kind = VerdictKind::Unknown;
      verdict.splits_used = splits;
      return verdict;
    }
    ++splits;
    int widest = 0;
    for (int j = 1; j < n; ++j)
      if (box[static_cast<size_t>(j)].width() > box[static_cast<size_t>(widest)].width())
        widest = j;
    const double mid = box[static_cast<size_t>(widest)].mid();
    std::vector<Interval> left = box, right = box;
    left[static_cast<size_t>(widest)] = Interval(box[static_cast<size_t>(widest)].lo, mid);
    right[static_cast<size_t>(widest)] = Interval(mid, box[static_cast<size_t>(widest)].hi);
    stack.push_back(std::move(right));
    stack.push_back(std::move(left));
  }

  verdict.kind = VerdictKind::ProvenUnsat;
  verdict.splits_used = splits;
  return verdict;
}

enum class CounterexampleClass { TrueCounterexample, RefinementOnly };

/// Case split on a freshly sampled counterexample state: either it genuinely
/// falsifies the candidate (positivity or decrease fails at the sample) or it
/// merely drives cover refinement.
inline CounterexampleClass classify_counterexample(const Candidate& c, const State& x_c,
                                                   const State& y_c) {
  if (evaluate_v(c, x_c) <= 0.0 || gradient_v(c, x_c).dot(y_c) >= 0.0)
    return CounterexampleClass::TrueCounterexample;
  return CounterexampleClass::RefinementOnly;
}

struct VerifyBudget {
  int max_splits_per_region = 2000;
};

struct VerifyStats {
  std::size_t regions_considered = 0;
  std::size_t regions_verified = 0;  // falsifier invocations this call
  std::size_t cache_hits = 0;
};

struct VerifyResult {
  // Verdict per simplex id (only simplices that can meet the region).
  std::vector<std::pair<int, Verdict>> verdicts;
  std::vector<State> new_states;    // sorted lexicographically, deduplicated
  std::vector<Sample> new_samples;  // oracle outputs for new_states
  bool falsified = false;
  bool any_small_region_failed = false;  // counterexample in a sub-threshold simplex
  VerifyStats stats;
};

/// Parallel verification of a candidate over every region that can intersect
/// the region of interest, with an UNSAT cache keyed by candidate and simplex
/// stamp. Results are deterministic in the worker count.
class Verifier {
 public:
  explicit Verifier(int workers = 1) : workers_(std::max(1, workers)) {}

  int workers() const { return workers_; }

  /// Reset the cache for a new candidate (stale rows can never be read:
  /// entries are tagged with the candidate sequence number).
  void begin_candidate() {
    ++candidate_seq_;
    cache_.clear();
  }

  std::uint64_t candidate_seq() const { return candidate_seq_; }

  VerifyResult verify_candidate(const Candidate& candidate, const Cover& cover,
                                const std::vector<Sample>& samples_by_point,
                                const RegionOfInterest& roi, const BlackBoxSystem& system,
                                double diam_threshold, const VerifyBudget& budget = {},
                                std::ostream* trace = nullptr) {
    const std::vector<int> ids = simplices_to_verify(cover, roi);
    VerifyResult result;
    result.stats.regions_considered = ids.size();

    std::vector<std::optional<RegionalQuery>> queries(ids.size());
    std::vector<Verdict> verdicts(ids.size());
    std::vector<bool> cached(ids.size(), false);

    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto& s = cover.simplex(ids[k]);
      const auto it = cache_.find(s.stamp);
      if (it != cache_.end() && it->second == candidate_seq_) {
        cached[k] = true;
        verdicts[k].kind = VerdictKind::ProvenUnsat;
        ++result.stats.cache_hits;
        continue;
      }
      RegionalQuery q(candidate, roi);
      q.simplex_coords = s.coords;
      q.simplex_stamp = s.stamp;
      q.simplex_diameter = s.diameter;
      q.vertex_samples.reserve(s.vertices.size());
      for (int vid : s.vertices)
        q.vertex_samples.push_back(samples_by_point[static_cast<size_t>(vid)]);
      Vector lo, hi;
      s.bounding_box(lo, hi);
      q.lip = system.regional_lipschitz(lo, hi);
      q.max_splits = budget.max_splits_per_region;
      queries[k] = std::move(q);
    }

    // Fan out the uncached queries; results land in their slot, so the
    // outcome does not depend on scheduling.
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= queries.size()) return;
        if (queries[k]) verdicts[k] = falsify_region(*queries[k]);
      }
    };
    if (workers_ == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < workers_ - 1; ++t) pool.emplace_back(worker);
      worker();
      for (auto& th : pool) th.join();
    }

    // Serial aggregation in simplex order.
    std::vector<State> states;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const Verdict& v = verdicts[k];
      if (!cached[k]) {
        ++result.stats.regions_verified;
        if (v.kind == VerdictKind::ProvenUnsat)
          cache_[cover.simplex(ids[k]).stamp] = candidate_seq_;
      }
      if (v.kind == VerdictKind::Falsified) {
        for (const auto& s : v.states) states.push_back(s);
      } else if (v.kind == VerdictKind::Unknown) {
        states.push_back(v.centroid);
      }
      if (v.kind != VerdictKind::ProvenUnsat &&
          cover.simplex(ids[k]).diameter <= diam_threshold)
        result.any_small_region_failed = true;
      if (trace) {
        const auto& s = cover.simplex(ids[k]);
        (*trace) << "{\"stamp\":" << s.stamp << ",\"vertices\":[";
        for (std::size_t j = 0; j < s.vertices.size(); ++j)
          (*trace) << (j ? "," : "") << s.vertices[j];
        (*trace) << "],\"verdict\":\""
                 << (v.kind == VerdictKind::ProvenUnsat
                         ? "proven_unsat"
                         : v.kind == VerdictKind::Falsified ? "falsified" : "unknown")
                 << "\",\"splits\":" << v.splits_used << ",\"cached\":"
                 << (cached[k] ? "true" : "false") << "}\n";
      }
      result.verdicts.emplace_back(ids[k], v);
    }

    std::sort(states.begin(), states.end(), lex_less);
    states.erase(std::unique(states.begin(), states.end(), exactly_equal), states.end());

    // Sample the oracle at genuinely new states only, in deterministic order.
    for (const auto& x : states) {
      if (cover.find_point(x) >= 0) continue;
      const State y = system.evaluate(x);
      result.new_states.push_back(x);
      result.new_samples.push_back({x, y});
      if (roi.contains(x) &&
          classify_counterexample(candidate, x, y) ==
              CounterexampleClass::TrueCounterexample)
        result.falsified = true;
    }
    return result;
  }

 private:
  int workers_;
  std::uint64_t candidate_seq_ = 0;
  std::unordered_map<std::uint64_t, std::uint64_t> cache_;  // stamp -> candidate seq
};

}  // namespace lyacert
