#pragma once

// Incremental Delaunay triangulation (Bowyer-Watson) covering the region of
// interest, dimension-generic and exercised at n in {2, 3}.
//
// The cover is seeded with the corners of the sampling bounding box so that
// the convex hull of the point set always contains the region of interest;
// every later insertion therefore lands inside the current hull. The initial
// box is split with the Kuhn (main-diagonal) decomposition, which realizes
// the documented co-circular tie rule: among the diagonals of a box the one
// through the lexicographically smallest corner wins. Later ties (point
// exactly on a circumsphere) keep the existing simplices: a simplex joins the
// insertion cavity only when the new point is strictly inside its
// circumsphere by more than a small relative band.
//
// Two repairs keep the cavity sound near degeneracies:
//   - a boundary facet whose affine hull contains the new point is either
//     absorbed (internal facet: the point has equal power with respect to
//     both adjacent circumspheres, so the outer simplex belongs to the
//     cavity too) or its zero-volume cone is skipped (hull facet, e.g. grid
//     points landing on box edges);
//   - if the point is strictly outside a boundary facet, the simplex across
//     it is absorbed until the cavity is star-shaped again.
// Orientation/volume decisions are evaluated in extended precision.

#include <lyacert/linalg.hpp>
#include <lyacert/system.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace lyacert {

struct DegenerateCoverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace geom {

/// Determinant by Gaussian elimination with partial pivoting in the given
/// scalar type (long double serves as the extended-precision path).
template <typename T>
T elimination_det(std::vector<T> m, int n) {
  T det = T(1);
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    T best = std::abs(m[static_cast<size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const T v = std::abs(m[static_cast<size_t>(r) * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best == T(0)) return T(0);
    if (pivot != col) {
      for (int c = 0; c < n; ++c)
        std::swap(m[static_cast<size_t>(pivot) * n + c], m[static_cast<size_t>(col) * n + c]);
      det = -det;
    }
    det *= m[static_cast<size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const T f = m[static_cast<size_t>(r) * n + col] / m[static_cast<size_t>(col) * n + col];
      for (int c = col; c < n; ++c)
        m[static_cast<size_t>(r) * n + c] -= f * m[static_cast<size_t>(col) * n + c];
    }
  }
  return det;
}

/// Signed volume factor det[P_1-P_0, ..., P_n-P_0] of a simplex given as an
/// n x (n+1) column matrix.
inline long double simplex_det(const Matrix& coords) {
  const int n = static_cast<int>(coords.rows());
  std::vector<long double> m(static_cast<size_t>(n) * n);
  for (int j = 1; j <= n; ++j)
    for (int i = 0; i < n; ++i)
      m[static_cast<size_t>(j - 1) * n + i] =
          static_cast<long double>(coords(i, j)) - static_cast<long double>(coords(i, 0));
  return elimination_det(std::move(m), n);
}

/// Signed volume factor of facet columns (n x n) joined with one more point.
inline long double facet_point_det(const Matrix& facet, const Vector& p) {
  const int n = static_cast<int>(facet.rows());
  std::vector<long double> m(static_cast<size_t>(n) * n);
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < n; ++i)
      m[static_cast<size_t>(j - 1) * n + i] =
          static_cast<long double>(facet(i, j)) - static_cast<long double>(facet(i, 0));
  for (int i = 0; i < n; ++i)
    m[static_cast<size_t>(n - 1) * n + i] =
        static_cast<long double>(p[i]) - static_cast<long double>(facet(i, 0));
  return elimination_det(std::move(m), n);
}

constexpr long double kDegeneracyFactor = 1e-14L;

}  // namespace geom

/// One simplex of the cover with its cached geometry. Stamps are unique and
/// monotone; destroyed simplices keep their stamp but are flagged dead, so a
/// stamp never refers to two different regions.
struct SimplexRegion {
  std::vector<int> vertices;   // n+1 point ids, ascending
  Matrix coords;               // n x (n+1), column j = point vertices[j]
  Vector circumcenter;
  double circumradius2 = 0.0;
  double diameter = 0.0;
  std::vector<int> neighbors;  // simplex across facet opposite vertex j; -1 = hull
  std::uint64_t stamp = 0;
  bool alive = true;

  void bounding_box(Vector& lo, Vector& hi) const {
    lo = coords.rowwise().minCoeff();
    hi = coords.rowwise().maxCoeff();
  }

  Vector centroid() const { return coords.rowwise().mean(); }
};

inline double simplex_diameter(const SimplexRegion& s) { return s.diameter; }

class Cover {
 public:
  /// Triangulate the given states. Either exactly n+1 affinely independent
  /// points (one simplex), or a set that contains the corners of its own
  /// bounding box (the usual seeded case).
  explicit Cover(const std::vector<State>& states) {
    if (states.empty()) throw std::invalid_argument("init_cover: empty input");
    dim_ = static_cast<int>(states[0].size());
    if (dim_ < 1) throw std::invalid_argument("init_cover: zero-dimensional state");

    std::size_t unique = 0;
    for (const auto& s : states) {
      if (s.size() != dim_) throw DimensionMismatch("init_cover: mixed dimensions");
      if (find_nearby_point(s) < 0) {
        register_point(s);
        ++unique;
      }
    }
    if (unique < static_cast<std::size_t>(dim_) + 1)
      throw std::invalid_argument("init_cover: need at least n+1 distinct states");

    if (unique == static_cast<std::size_t>(dim_) + 1)
      init_single_simplex();
    else
      init_box_seeded();
  }

  int dimension() const { return dim_; }
  const std::vector<State>& points() const { return points_; }
  std::size_t duplicates_skipped() const { return duplicates_skipped_; }

  /// Id of the registered point within duplicate tolerance of p, or -1.
  int find_point(const State& p) const { return find_nearby_point(p); }

  const SimplexRegion& simplex(int id) const { return simplices_[static_cast<size_t>(id)]; }
  std::size_t simplex_slots() const { return simplices_.size(); }
  std::size_t num_alive() const { return alive_count_; }

  /// Ids of live simplices in ascending (deterministic) order.
  std::vector<int> alive_ids() const {
    std::vector<int> ids;
    ids.reserve(alive_count_);
    for (int i = 0; i < static_cast<int>(simplices_.size()); ++i)
      if (simplices_[static_cast<size_t>(i)].alive) ids.push_back(i);
    return ids;
  }

  /// Insert states (duplicates within 1e-12 of an existing point are
  /// skipped); returns ids of the newly created simplices.
  std::vector<int> insert_points(const std::vector<State>& states) {
    std::vector<int> created;
    for (const auto& s : states) {
      if (s.size() != dim_) throw DimensionMismatch("insert_points: dimension mismatch");
      if (find_nearby_point(s) >= 0) {
        ++duplicates_skipped_;
        continue;
      }
      const int pid = register_point(s);
      insert_registered_point(pid, created);
    }
    return created;
  }

  /// Barycentric coordinates of p in simplex id (sums to one).
  Vector barycentric(int id, const State& p) const {
    const auto& s = simplices_[static_cast<size_t>(id)];
    Matrix a(dim_, dim_);
    for (int j = 1; j <= dim_; ++j) a.col(j - 1) = s.coords.col(j) - s.coords.col(0);
    const Vector rest = a.partialPivLu().solve(p - s.coords.col(0));
    Vector lambda(dim_ + 1);
    lambda[0] = 1.0 - rest.sum();
    lambda.tail(dim_) = rest;
    return lambda;
  }

  /// Locate a point: id of a simplex containing it (within tolerance), or -1.
  int locate(const State& p, double tol = 1e-9) const {
    if (alive_count_ == 0) return -1;
    int current = last_created_ >= 0 && simplices_[static_cast<size_t>(last_created_)].alive
                      ? last_created_
                      : first_alive();
    const std::size_t step_cap = 4 * alive_count_ + 32;
    for (std::size_t step = 0; step < step_cap; ++step) {
      const Vector lambda = barycentric(current, p);
      int worst = 0;
      for (int j = 1; j <= dim_; ++j)
        if (lambda[j] < lambda[worst]) worst = j;
      if (lambda[worst] >= -tol) return current;
      const int next =
          simplices_[static_cast<size_t>(current)].neighbors[static_cast<size_t>(worst)];
      if (next < 0) break;  // walked off the hull; fall through to the scan
      current = next;
    }
    // Fallback: exhaustive scan (walk cycled near a degeneracy).
    for (int id = 0; id < static_cast<int>(simplices_.size()); ++id) {
      if (!simplices_[static_cast<size_t>(id)].alive) continue;
      if (barycentric(id, p).minCoeff() >= -tol) return id;
    }
    return -1;
  }

 private:
  // --- point bookkeeping ----------------------------------------------------

  struct CellHash {
    std::size_t operator()(const std::vector<std::int64_t>& key) const {
      std::size_t h = 1469598103934665603ull;
      for (auto v : key) {
        h ^= static_cast<std::size_t>(v);
        h *= 1099511628211ull;
      }
      return h;
    }
  };

  static constexpr double kDuplicateTol = 1e-12;

  std::vector<std::int64_t> cell_key(const State& p) const {
    std::vector<std::int64_t> key(static_cast<size_t>(dim_));
    for (int i = 0; i < dim_; ++i)
      key[static_cast<size_t>(i)] = static_cast<std::int64_t>(std::floor(p[i] / kDuplicateTol));
    return key;
  }

  int find_nearby_point(const State& p) const {
    const std::vector<std::int64_t> key = cell_key(p);
    std::vector<std::int64_t> probe = key;
    std::vector<int> offsets(static_cast<size_t>(dim_), -1);
    while (true) {
      for (int i = 0; i < dim_; ++i)
        probe[static_cast<size_t>(i)] = key[static_cast<size_t>(i)] + offsets[static_cast<size_t>(i)];
      const auto it = point_cells_.find(probe);
      if (it != point_cells_.end()) {
        for (int pid : it->second)
          if ((points_[static_cast<size_t>(pid)] - p).norm() <= kDuplicateTol) return pid;
      }
      int k = 0;
      while (k < dim_ && offsets[static_cast<size_t>(k)] == 1) {
        offsets[static_cast<size_t>(k)] = -1;
        ++k;
      }
      if (k == dim_) break;
      ++offsets[static_cast<size_t>(k)];
    }
    return -1;
  }

  int register_point(const State& p) {
    const int id = static_cast<int>(points_.size());
    points_.push_back(p);
    point_cells_[cell_key(p)].push_back(id);
    return id;
  }

  // --- simplex construction -------------------------------------------------

  double make_circumsphere(const Matrix& coords, Vector& center) const {
    Matrix a(dim_, dim_);
    Vector rhs(dim_);
    for (int j = 1; j <= dim_; ++j) {
      const Vector d = coords.col(j) - coords.col(0);
      a.row(j - 1) = d.transpose();
      rhs[j - 1] = 0.5 * d.squaredNorm();
    }
    const Vector offset = a.partialPivLu().solve(rhs);
    center = coords.col(0) + offset;
    return offset.squaredNorm();
  }

  static double pairwise_diameter(const Matrix& coords) {
    double d2 = 0.0;
    for (int a = 0; a < coords.cols(); ++a)
      for (int b = a + 1; b < coords.cols(); ++b)
        d2 = std::max(d2, (coords.col(a) - coords.col(b)).squaredNorm());
    return std::sqrt(d2);
  }

  bool volume_degenerate(long double vol, double diameter) const {
    long double scale = 1.0L;
    for (int k = 0; k < dim_; ++k) scale *= static_cast<long double>(diameter);
    return std::abs(vol) < geom::kDegeneracyFactor * scale;
  }

  int create_simplex(std::vector<int> vertex_ids) {
    std::sort(vertex_ids.begin(), vertex_ids.end());
    SimplexRegion s;
    s.vertices = std::move(vertex_ids);
    s.coords.resize(dim_, dim_ + 1);
    for (int j = 0; j <= dim_; ++j)
      s.coords.col(j) = points_[static_cast<size_t>(s.vertices[static_cast<size_t>(j)])];
    s.diameter = pairwise_diameter(s.coords);

    if (volume_degenerate(geom::simplex_det(s.coords), s.diameter))
      throw DegenerateCoverError("degenerate simplex rejected during retriangulation");

    s.circumradius2 = make_circumsphere(s.coords, s.circumcenter);
    s.neighbors.assign(static_cast<size_t>(dim_ + 1), -1);
    s.stamp = next_stamp_++;
    const int id = static_cast<int>(simplices_.size());
    simplices_.push_back(std::move(s));
    ++alive_count_;
    last_created_ = id;
    return id;
  }

  void kill_simplex(int id) {
    auto& s = simplices_[static_cast<size_t>(id)];
    if (s.alive) {
      s.alive = false;
      --alive_count_;
    }
  }

  /// Strict in-circumsphere test with a relative tie band: points on the
  /// sphere (within the band) do not join the cavity, so existing diagonals
  /// survive co-spherical insertions.
  bool strictly_inside_circumsphere(const SimplexRegion& s, const State& p) const {
    const double d2 = (p - s.circumcenter).squaredNorm();
    const double tie = 4e-13 * (1.0 + s.circumradius2 + d2);
    return d2 < s.circumradius2 - tie;
  }

  // --- initial triangulations -----------------------------------------------

  void init_single_simplex() {
    std::vector<int> ids(static_cast<size_t>(dim_ + 1));
    std::iota(ids.begin(), ids.end(), 0);
    try {
      create_simplex(std::move(ids));
    } catch (const DegenerateCoverError&) {
      throw std::invalid_argument("init_cover: input states are affinely dependent");
    }
  }

  void init_box_seeded() {
    Vector lo = points_[0], hi = points_[0];
    for (const auto& p : points_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    for (int i = 0; i < dim_; ++i)
      if (!(hi[i] - lo[i] > kDuplicateTol))
        throw std::invalid_argument("init_cover: states are degenerate along an axis");

    // Map every box corner to an existing point id.
    const int corners = 1 << dim_;
    std::vector<int> corner_ids(static_cast<size_t>(corners), -1);
    for (int mask = 0; mask < corners; ++mask) {
      Vector c(dim_);
      for (int i = 0; i < dim_; ++i) c[i] = (mask >> i) & 1 ? hi[i] : lo[i];
      corner_ids[static_cast<size_t>(mask)] = find_nearby_point(c);
      if (corner_ids[static_cast<size_t>(mask)] < 0)
        throw std::invalid_argument(
            "init_cover: bounding-box corners must be part of the seed states");
    }

    // Kuhn decomposition along the main diagonal lo -> hi: one simplex per
    // axis permutation.
    std::vector<int> perm(static_cast<size_t>(dim_));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> initial;
    do {
      std::vector<int> vertex_ids;
      int mask = 0;
      vertex_ids.push_back(corner_ids[0]);
      for (int k = 0; k < dim_; ++k) {
        mask |= 1 << perm[static_cast<size_t>(k)];
        vertex_ids.push_back(corner_ids[static_cast<size_t>(mask)]);
      }
      initial.push_back(create_simplex(std::move(vertex_ids)));
    } while (std::next_permutation(perm.begin(), perm.end()));
    link_neighbors(initial);

    // Insert every non-corner point in input order.
    std::unordered_set<int> corner_set(corner_ids.begin(), corner_ids.end());
    std::vector<int> scratch;
    for (int pid = 0; pid < static_cast<int>(points_.size()); ++pid) {
      if (corner_set.count(pid)) continue;
      insert_registered_point(pid, scratch);
    }
  }

  /// Rebuild mutual neighbor links for a batch of simplices (their outer
  /// facets keep the default hull marker).
  void link_neighbors(const std::vector<int>& ids) {
    std::map<std::vector<int>, std::pair<int, int>> facets;
    for (int id : ids) {
      auto& s = simplices_[static_cast<size_t>(id)];
      for (int j = 0; j <= dim_; ++j) {
        std::vector<int> facet;
        for (int k = 0; k <= dim_; ++k)
          if (k != j) facet.push_back(s.vertices[static_cast<size_t>(k)]);
        auto it = facets.find(facet);
        if (it == facets.end()) {
          facets.emplace(std::move(facet), std::make_pair(id, j));
        } else {
          const auto [oid, oj] = it->second;
          s.neighbors[static_cast<size_t>(j)] = oid;
          simplices_[static_cast<size_t>(oid)].neighbors[static_cast<size_t>(oj)] = id;
        }
      }
    }
  }

  // --- Bowyer-Watson insertion ------------------------------------------------

  struct BoundaryFacet {
    std::vector<int> vertex_ids;
    Matrix coords;
    int outer;        // simplex across the facet, -1 on the hull
    int outer_slot;   // neighbor slot in the outer simplex
    bool degenerate;  // p lies on the facet's affine hull (hull facets only)
  };

  void insert_registered_point(int pid, std::vector<int>& created) {
    const State& p = points_[static_cast<size_t>(pid)];
    const int seed = locate(p);
    if (seed < 0)
      throw std::invalid_argument("insert_points: state outside the covered hull");

    // Cavity: the located simplex plus every facet-reachable simplex whose
    // circumsphere strictly contains p.
    std::vector<int> cavity{seed};
    std::unordered_set<int> in_cavity{seed};
    for (std::size_t next = 0; next < cavity.size(); ++next) {
      for (int nb : simplices_[static_cast<size_t>(cavity[next])].neighbors) {
        if (nb < 0 || in_cavity.count(nb)) continue;
        if (strictly_inside_circumsphere(simplices_[static_cast<size_t>(nb)], p)) {
          in_cavity.insert(nb);
          cavity.push_back(nb);
        }
      }
    }

    // Boundary collection with two cavity-growing repairs (restart on growth):
    //  - p on an internal facet's hull: absorb the outer simplex (p has equal
    //    power w.r.t. both adjacent circumspheres, so it belongs inside);
    //  - p strictly outside a facet: absorb the outer simplex until the
    //    cavity is star-shaped around p.
    std::vector<BoundaryFacet> boundary;
    for (bool stable = false; !stable;) {
      stable = true;
      boundary.clear();
      for (std::size_t ci = 0; ci < cavity.size() && stable; ++ci) {
        const int id = cavity[ci];
        const auto& s = simplices_[static_cast<size_t>(id)];
        for (int j = 0; j <= dim_ && stable; ++j) {
          const int outer = s.neighbors[static_cast<size_t>(j)];
          if (outer >= 0 && in_cavity.count(outer)) continue;

          BoundaryFacet f;
          f.outer = outer;
          f.outer_slot = -1;
          f.degenerate = false;
          f.coords.resize(dim_, dim_);
          int col = 0;
          for (int k = 0; k <= dim_; ++k) {
            if (k == j) continue;
            f.vertex_ids.push_back(s.vertices[static_cast<size_t>(k)]);
            f.coords.col(col++) = s.coords.col(k);
          }
          if (outer >= 0) {
            const auto& o = simplices_[static_cast<size_t>(outer)];
            for (int k = 0; k <= dim_; ++k) {
              const int v = o.vertices[static_cast<size_t>(k)];
              if (std::find(f.vertex_ids.begin(), f.vertex_ids.end(), v) ==
                  f.vertex_ids.end()) {
                f.outer_slot = k;
                break;
              }
            }
          }

          double cone_diam = pairwise_diameter(f.coords);
          for (int k = 0; k < dim_; ++k)
            cone_diam = std::max(cone_diam, (p - f.coords.col(k)).norm());
          const long double vol_p = geom::facet_point_det(f.coords, p);

          if (volume_degenerate(vol_p, cone_diam)) {
            if (outer >= 0) {
              // p on the plane of an internal facet has equal power with
              // respect to both adjacent circumspheres, so the outer simplex
              // belongs in the cavity; anything else is a contradiction.
              const auto& o = simplices_[static_cast<size_t>(outer)];
              const double d2 = (p - o.circumcenter).squaredNorm();
              if (d2 - o.circumradius2 > 1e-9 * (1.0 + o.circumradius2 + d2))
                throw DegenerateCoverError(
                    "insert_points: inconsistent degenerate facet");
              in_cavity.insert(outer);
              cavity.push_back(outer);
              stable = false;
              break;
            }
            f.degenerate = true;
          } else {
            const long double vol_w = geom::facet_point_det(f.coords, s.coords.col(j));
            if ((vol_p > 0) != (vol_w > 0)) {
              if (outer < 0)
                throw std::invalid_argument(
                    "insert_points: state outside the covered hull");
              in_cavity.insert(outer);
              cavity.push_back(outer);
              stable = false;
              break;
            }
          }
          boundary.push_back(std::move(f));
        }
      }
    }

    // Retriangulate: cone from p over each non-degenerate boundary facet.
    std::vector<int> fresh;
    std::map<std::vector<int>, std::pair<int, int>> open_facets;
    for (const auto& f : boundary) {
      if (f.degenerate) continue;
      std::vector<int> ids = f.vertex_ids;
      ids.push_back(pid);
      const int nid = create_simplex(std::move(ids));
      fresh.push_back(nid);
      auto& ns = simplices_[static_cast<size_t>(nid)];

      // Link across the base facet to the outer simplex.
      const int base_slot = static_cast<int>(
          std::find(ns.vertices.begin(), ns.vertices.end(), pid) - ns.vertices.begin());
      ns.neighbors[static_cast<size_t>(base_slot)] = f.outer;
      if (f.outer >= 0)
        simplices_[static_cast<size_t>(f.outer)]
            .neighbors[static_cast<size_t>(f.outer_slot)] = nid;

      // Pair the p-incident facets among the new simplices.
      for (int j = 0; j <= dim_; ++j) {
        if (j == base_slot) continue;
        std::vector<int> facet;
        for (int k = 0; k <= dim_; ++k)
          if (k != j) facet.push_back(ns.vertices[static_cast<size_t>(k)]);
        auto it = open_facets.find(facet);
        if (it == open_facets.end()) {
          open_facets.emplace(std::move(facet), std::make_pair(nid, j));
        } else {
          const auto [oid, oj] = it->second;
          ns.neighbors[static_cast<size_t>(j)] = oid;
          simplices_[static_cast<size_t>(oid)].neighbors[static_cast<size_t>(oj)] = nid;
          open_facets.erase(it);
        }
      }
    }
    if (fresh.empty())
      throw DegenerateCoverError("insert_points: retriangulation produced no simplices");

    for (int id : cavity) kill_simplex(id);
    created.insert(created.end(), fresh.begin(), fresh.end());
  }

  int first_alive() const {
    for (int i = static_cast<int>(simplices_.size()) - 1; i >= 0; --i)
      if (simplices_[static_cast<size_t>(i)].alive) return i;
    return -1;
  }

  int dim_ = 0;
  std::vector<State> points_;
  std::unordered_map<std::vector<std::int64_t>, std::vector<int>, CellHash> point_cells_;
  std::vector<SimplexRegion> simplices_;
  std::size_t alive_count_ = 0;
  std::uint64_t next_stamp_ = 1;
  int last_created_ = -1;
  std::size_t duplicates_skipped_ = 0;
};

/// init_cover per the driver contract: states must include the bounding-box
/// corner seeds (or form a single simplex).
inline Cover init_cover(const std::vector<State>& states) { return Cover(states); }

/// Conservative region filter: drops only simplices whose bounding box
/// provably misses the region of interest.
inline std::vector<int> simplices_to_verify(const Cover& cover, const RegionOfInterest& roi) {
  std::vector<int> out;
  for (int id : cover.alive_ids()) {
    const auto& s = cover.simplex(id);
    Vector lo, hi;
    s.bounding_box(lo, hi);
    std::vector<Interval> box(static_cast<size_t>(cover.dimension()));
    for (int i = 0; i < cover.dimension(); ++i)
      box[static_cast<size_t>(i)] = Interval(lo[i], hi[i]);
    if (!roi.certainly_outside(box)) out.push_back(id);
  }
  return out;
}

}  // namespace lyacert
