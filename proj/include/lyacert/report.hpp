#pragma once

// Config parsing, machine-readable run reports, artifact export, and the
// independent white-box validator used to accept results.

#include <lyacert/cegis.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace lyacert {

using Json = nlohmann::ordered_json;

constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Config <-> JSON
// ---------------------------------------------------------------------------

inline bool operator==(const RegionOfInterest& a, const RegionOfInterest& b) {
  if (a.dimension() != b.dimension() || a.is_annulus() != b.is_annulus()) return false;
  if (a.is_annulus())
    return a.annulus().r_min == b.annulus().r_min && a.annulus().r_max == b.annulus().r_max;
  return a.box_shell().inner == b.box_shell().inner &&
         a.box_shell().outer == b.box_shell().outer;
}

inline bool operator==(const CegisConfig& a, const CegisConfig& b) {
  // Worker count is a command-line knob, not part of the persisted config.
  return a.system_name == b.system_name && a.roi == b.roi &&
         a.template_family == b.template_family && a.delta == b.delta &&
         a.gamma == b.gamma && a.max_k == b.max_k && a.grid_per_axis == b.grid_per_axis &&
         a.sample_budget == b.sample_budget && a.verifier_splits == b.verifier_splits &&
         a.seed == b.seed && a.wall_clock_seconds == b.wall_clock_seconds;
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Json roi_to_json(const RegionOfInterest& roi) {
  Json j;
  if (roi.is_annulus()) {
    j["type"] = "annulus";
    j["r_min"] = roi.annulus().r_min;
    j["r_max"] = roi.annulus().r_max;
  } else {
    j["type"] = "box_shell";
    j["inner"] = std::vector<double>(roi.box_shell().inner.data(),
                                     roi.box_shell().inner.data() + roi.dimension());
    j["outer"] = std::vector<double>(roi.box_shell().outer.data(),
                                     roi.box_shell().outer.data() + roi.dimension());
  }
  return j;
}

inline RegionOfInterest roi_from_json(const Json& j) {
  for (const auto& [key, _] : j.items())
    if (key != "type" && key != "r_min" && key != "r_max" && key != "inner" &&
        key != "outer")
      throw ConfigError("config: unknown roi key '" + key + "'");
  const std::string type = j.at("type").get<std::string>();
  if (type == "annulus") {
    return RegionOfInterest(2, Annulus{j.at("r_min").get<double>(),
                                       j.at("r_max").get<double>()});
  }
  if (type == "box_shell") {
    const auto inner = j.at("inner").get<std::vector<double>>();
    const auto outer = j.at("outer").get<std::vector<double>>();
    if (inner.size() != outer.size())
      throw ConfigError("config: box_shell inner/outer length mismatch");
    Vector vi(static_cast<Eigen::Index>(inner.size())),
        vo(static_cast<Eigen::Index>(outer.size()));
    for (std::size_t i = 0; i < inner.size(); ++i) {
      vi[static_cast<Eigen::Index>(i)] = inner[i];
      vo[static_cast<Eigen::Index>(i)] = outer[i];
    }
    return RegionOfInterest(static_cast<int>(inner.size()), BoxShell{vi, vo});
  }
  throw ConfigError("config: roi type must be 'annulus' or 'box_shell'");
}

// An annulus parses with a placeholder dimension; bind it to the system's.
inline RegionOfInterest rebind_roi_dimension(const RegionOfInterest& roi, int n) {
  if (roi.is_annulus()) return RegionOfInterest(n, roi.annulus());
  if (roi.dimension() != n)
    throw ConfigError("config: roi dimension does not match the system");
  return roi;
}

}  // namespace detail

inline Json export_config(const CegisConfig& cfg) {
  Json j;
  j["system"] = cfg.system_name;
  j["template"] = cfg.template_family == TemplateFamily::Quadratic ? "quadratic"
                                                                   : "tanh_quadratic";
  if (cfg.roi) j["roi"] = detail::roi_to_json(*cfg.roi);
  j["delta"] = cfg.delta;
  if (cfg.gamma) j["gamma"] = *cfg.gamma;
  if (cfg.max_k) j["max_k"] = *cfg.max_k;
  j["grid_per_axis"] = cfg.grid_per_axis;
  j["sample_budget"] = cfg.sample_budget;
  j["verifier_splits"] = cfg.verifier_splits;
  j["seed"] = cfg.seed;
  j["wall_clock_seconds"] = cfg.wall_clock_seconds;
  return j;
}

/// Parse and validate a config object. Defaults follow the experiment setup:
/// delta 1e-4, 6^n seed grid, iteration limit 40, budget 500000.
inline CegisConfig parse_config(const Json& j) {
  static const std::vector<std::string> known = {
      "system", "template", "roi",  "delta", "gamma",
      "max_k",  "grid_per_axis", "sample_budget", "verifier_splits",
      "seed",   "wall_clock_seconds"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("config: unknown key '" + key + "'");

  CegisConfig cfg;
  if (!j.contains("system")) throw ConfigError("config: missing required key 'system'");
  cfg.system_name = j.at("system").get<std::string>();
  const Benchmark* bench = find_benchmark(cfg.system_name);
  if (!bench) throw ConfigError("config: unknown system '" + cfg.system_name + "'");

  if (j.contains("template")) {
    const std::string t = j.at("template").get<std::string>();
    if (t == "quadratic")
      cfg.template_family = TemplateFamily::Quadratic;
    else if (t == "tanh_quadratic")
      cfg.template_family = TemplateFamily::TanhQuadratic;
    else
      throw ConfigError("config: template must be 'quadratic' or 'tanh_quadratic'");
  }
  try {
    if (j.contains("roi"))
      cfg.roi = detail::rebind_roi_dimension(detail::roi_from_json(j.at("roi")),
                                             bench->dimension);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: invalid roi: ") + e.what());
  }
  if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
  if (!(cfg.delta > 0.0)) throw ConfigError("config: delta must be > 0");
  if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
  if (j.contains("max_k")) cfg.max_k = j.at("max_k").get<long>();
  if (cfg.gamma && cfg.max_k)
    throw ConfigError("config: gamma and max_k are mutually exclusive");
  if (cfg.gamma && !(*cfg.gamma > 0.0 && *cfg.gamma < 1.0))
    throw ConfigError("config: gamma must lie in (0, 1)");
  if (cfg.max_k && *cfg.max_k < 1) throw ConfigError("config: max_k must be >= 1");
  if (j.contains("grid_per_axis")) cfg.grid_per_axis = j.at("grid_per_axis").get<int>();
  if (cfg.grid_per_axis < 2) throw ConfigError("config: grid_per_axis must be >= 2");
  if (j.contains("sample_budget"))
    cfg.sample_budget = j.at("sample_budget").get<std::uint64_t>();
  if (j.contains("verifier_splits"))
    cfg.verifier_splits = j.at("verifier_splits").get<int>();
  if (cfg.verifier_splits < 0) throw ConfigError("config: verifier_splits must be >= 0");
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("wall_clock_seconds"))
    cfg.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  return cfg;
}

inline CegisConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: parse failure in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// White-box validation
// ---------------------------------------------------------------------------

struct ValidationReport {
  std::size_t states_checked = 0;
  std::size_t violations = 0;
  double worst_lie = -std::numeric_limits<double>::infinity();
  double min_v = std::numeric_limits<double>::infinity();
  std::vector<State> violation_states;  // capped sample of offenders
};

/// Check Conditions (positivity and decrease) against the benchmark's true
/// dynamics at `trials` random region states plus a regular grid.
inline ValidationReport validate_candidate(const Candidate& c, const Benchmark& bench,
                                           const RegionOfInterest& roi,
                                           std::size_t trials, std::uint64_t seed = 0) {
  ValidationReport rep;
  const auto check = [&](const State& x) {
    if (!roi.contains(x)) return;
    ++rep.states_checked;
    const double v = evaluate_v(c, x);
    const double lie = gradient_v(c, x).dot(bench.dynamics(x));
    rep.worst_lie = std::max(rep.worst_lie, lie);
    rep.min_v = std::min(rep.min_v, v);
    if (v <= 0.0 || lie >= 0.0) {
      ++rep.violations;
      if (rep.violation_states.size() < 16) rep.violation_states.push_back(x);
    }
  };

  Vector lo, hi;
  roi.bounding_box(lo, hi);
  const int n = roi.dimension();

  // Regular grid.
  const int per_axis = n == 2 ? 41 : 17;
  std::vector<int> idx(static_cast<size_t>(n), 0);
  while (true) {
    Vector x(n);
    for (int i = 0; i < n; ++i)
      x[i] = lo[i] + (hi[i] - lo[i]) * idx[static_cast<size_t>(i)] / (per_axis - 1);
    check(x);
    int k = 0;
    while (k < n && idx[static_cast<size_t>(k)] == per_axis - 1) {
      idx[static_cast<size_t>(k)] = 0;
      ++k;
    }
    if (k == n) break;
    ++idx[static_cast<size_t>(k)];
  }

  // Random probes (rejection-sampled into the region).
  std::mt19937_64 gen(seed);
  std::size_t accepted = 0, attempts = 0;
  const std::size_t max_attempts = trials * 20 + 1000;
  while (accepted < trials && attempts < max_attempts) {
    ++attempts;
    Vector x(n);
    for (int i = 0; i < n; ++i) {
      std::uniform_real_distribution<double> dist(lo[i], hi[i]);
      x[i] = dist(gen);
    }
    if (!roi.contains(x)) continue;
    ++accepted;
    check(x);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Basin-of-attraction level estimation
// ---------------------------------------------------------------------------

/// Largest sublevel value c for which {V <= c}, probed on a grid extended a
/// quarter beyond the region's bounding box, stays inside the region plus its
/// inner hole. Found by bisection.
inline double boa_level(const Candidate& c, const RegionOfInterest& roi,
                        int per_axis = 0, int bisection_steps = 40) {
  Vector lo, hi;
  roi.bounding_box(lo, hi);
  const int n = roi.dimension();
  if (per_axis == 0) per_axis = n == 2 ? 201 : 41;

  const auto allowed = [&](const State& x) {
    if (roi.is_annulus()) return x.norm() <= roi.annulus().r_max;
    for (int i = 0; i < n; ++i)
      if (std::abs(x[i]) > roi.box_shell().outer[i]) return false;
    return true;
  };

  std::vector<std::pair<double, bool>> probes;  // (V, allowed)
  double v_max = 0.0;
  std::vector<int> idx(static_cast<size_t>(n), 0);
  while (true) {
    Vector x(n);
    for (int i = 0; i < n; ++i) {
      const double span = hi[i] - lo[i];
      x[i] = (lo[i] - 0.125 * span) +
             1.25 * span * idx[static_cast<size_t>(i)] / (per_axis - 1);
    }
    const double v = evaluate_v(c, x);
    probes.emplace_back(v, allowed(x));
    v_max = std::max(v_max, v);
    int k = 0;
    while (k < n && idx[static_cast<size_t>(k)] == per_axis - 1) {
      idx[static_cast<size_t>(k)] = 0;
      ++k;
    }
    if (k == n) break;
    ++idx[static_cast<size_t>(k)];
  }

  const auto feasible = [&](double level) {
    for (const auto& [v, ok] : probes)
      if (v <= level && !ok) return false;
    return true;
  };

  double good = 0.0, bad = v_max + 1.0;
  if (feasible(bad)) return bad;
  for (int step = 0; step < bisection_steps; ++step) {
    const double mid = 0.5 * (good + bad);
    (feasible(mid) ? good : bad) = mid;
  }
  return good;
}

// ---------------------------------------------------------------------------
// Run report
// ---------------------------------------------------------------------------

struct RunReport {
  int schema_version = kReportSchemaVersion;
  CegisConfig config;
  OutcomeKind outcome = OutcomeKind::IterationLimit;
  CegisStats stats;
  std::optional<Candidate> candidate;
  std::optional<double> boa;
  std::optional<ValidationReport> validation;
  std::vector<IterationRecord> trace;
};

namespace detail {

inline Json vector_to_json(const Vector& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  return Json(out);
}

inline Vector vector_from_json(const Json& j) {
  const auto vals = j.get<std::vector<double>>();
  Vector v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

}  // namespace detail

/// Build the machine-readable report. Timing can be suppressed so reports of
/// equivalent runs compare byte-for-byte.
inline RunReport build_report(const CegisConfig& cfg, const CegisOutcome& outcome,
                              bool include_timing = true) {
  RunReport r;
  r.config = cfg;
  r.outcome = outcome.kind;
  r.stats = outcome.stats;
  if (!include_timing) r.stats.seconds = 0.0;
  r.candidate = outcome.candidate;
  r.trace = outcome.trace;
  return r;
}

inline Json to_json(const RunReport& r) {
  Json j;
  j["schema_version"] = r.schema_version;
  j["outcome"] = outcome_name(r.outcome);
  j["config"] = export_config(r.config);
  j["stats"] = {{"k", r.stats.k},
                {"samples_learner", r.stats.samples_learner},
                {"samples_total", r.stats.samples_total},
                {"simplices", r.stats.simplices},
                {"seconds", r.stats.seconds},
                {"oracle_samples", r.stats.oracle_samples}};
  if (r.candidate) {
    Json c;
    c["template"] = r.candidate->kind.name();
    c["n"] = r.candidate->kind.n;
    c["d"] = r.candidate->kind.param_dim();
    c["theta"] = detail::vector_to_json(r.candidate->theta);
    const Matrix th = theta_matrix(*r.candidate);
    std::vector<double> row_major;
    for (int i = 0; i < th.rows(); ++i)
      for (int jx = 0; jx < th.cols(); ++jx) row_major.push_back(th(i, jx));
    c["theta_matrix_row_major"] = row_major;
    j["candidate"] = c;
  }
  if (r.boa) j["boa_level"] = *r.boa;
  if (r.validation) {
    j["validation"] = {{"states_checked", r.validation->states_checked},
                       {"violations", r.validation->violations},
                       {"worst_lie", r.validation->worst_lie},
                       {"min_v", r.validation->min_v}};
  }
  Json trace = Json::array();
  for (const auto& rec : r.trace) {
    Json t;
    t["k"] = rec.k;
    t["theta"] = detail::vector_to_json(rec.theta);
    t["inner_passes"] = rec.inner_passes;
    t["regions_verified"] = rec.regions_verified;
    t["cache_hits"] = rec.cache_hits;
    t["counterexamples"] = rec.counterexamples;
    Json falsifiers = Json::array();
    for (const auto& s : rec.true_falsifiers)
      falsifiers.push_back({{"x", detail::vector_to_json(s.x)},
                            {"y", detail::vector_to_json(s.y)}});
    t["true_falsifiers"] = falsifiers;
    trace.push_back(t);
  }
  j["trace"] = trace;
  return j;
}

inline RunReport report_from_json(const Json& j) {
  RunReport r;
  r.schema_version = j.at("schema_version").get<int>();
  r.config = parse_config(j.at("config"));
  const std::string tag = j.at("outcome").get<std::string>();
  for (OutcomeKind k :
       {OutcomeKind::Found, OutcomeKind::NoLyapunovInSpace, OutcomeKind::NotDeltaProvable,
        OutcomeKind::IterationLimit, OutcomeKind::ResourceLimit})
    if (tag == outcome_name(k)) r.outcome = k;
  const auto& s = j.at("stats");
  r.stats.k = s.at("k").get<long>();
  r.stats.samples_learner = s.at("samples_learner").get<std::size_t>();
  r.stats.samples_total = s.at("samples_total").get<std::size_t>();
  r.stats.simplices = s.at("simplices").get<std::size_t>();
  r.stats.seconds = s.at("seconds").get<double>();
  r.stats.oracle_samples = s.at("oracle_samples").get<std::uint64_t>();
  if (j.contains("candidate")) {
    const auto& c = j.at("candidate");
    const TemplateKind kind{c.at("template").get<std::string>() == "quadratic"
                                ? TemplateFamily::Quadratic
                                : TemplateFamily::TanhQuadratic,
                            c.at("n").get<int>()};
    r.candidate = Candidate(kind, detail::vector_from_json(c.at("theta")));
  }
  if (j.contains("boa_level")) r.boa = j.at("boa_level").get<double>();
  if (j.contains("validation")) {
    ValidationReport v;
    v.states_checked = j.at("validation").at("states_checked").get<std::size_t>();
    v.violations = j.at("validation").at("violations").get<std::size_t>();
    v.worst_lie = j.at("validation").at("worst_lie").get<double>();
    v.min_v = j.at("validation").at("min_v").get<double>();
    r.validation = v;
  }
  for (const auto& t : j.at("trace")) {
    IterationRecord rec;
    rec.k = t.at("k").get<long>();
    rec.theta = detail::vector_from_json(t.at("theta"));
    rec.inner_passes = t.at("inner_passes").get<int>();
    rec.regions_verified = t.at("regions_verified").get<std::size_t>();
    rec.cache_hits = t.at("cache_hits").get<std::size_t>();
    rec.counterexamples = t.at("counterexamples").get<std::size_t>();
    for (const auto& f : t.at("true_falsifiers"))
      rec.true_falsifiers.push_back({detail::vector_from_json(f.at("x")),
                                     detail::vector_from_json(f.at("y"))});
    r.trace.push_back(std::move(rec));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Artifact export
// ---------------------------------------------------------------------------

namespace detail {

inline void write_full_precision(std::ostream& os, double v) {
  os << std::setprecision(17) << v;
}

}  // namespace detail

/// Write report.json (always), the triangulation CSVs (when requested and a
/// cover exists), and a level-set grid for basin plotting (when a candidate
/// exists). Returns the list of files written.
inline std::vector<std::string> export_artifacts(const RunReport& report,
                                                 const RunArtifacts& artifacts,
                                                 const std::string& outdir,
                                                 bool emit_triangulation = false) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  std::vector<std::string> written;

  {
    const fs::path p = fs::path(outdir) / "report.json";
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << to_json(report).dump(2) << "\n";
    written.push_back(p.string());
  }

  const bool include_data = report.outcome != OutcomeKind::NoLyapunovInSpace;
  if (include_data && emit_triangulation && artifacts.cover) {
    {
      const fs::path p = fs::path(outdir) / "samples.csv";
      std::ofstream out(p);
      const int n = artifacts.cover->dimension();
      out << "id";
      for (int i = 0; i < n; ++i) out << ",x" << i;
      for (int i = 0; i < n; ++i) out << ",y" << i;
      out << "\n";
      for (std::size_t i = 0; i < artifacts.samples.size(); ++i) {
        out << i;
        for (int k = 0; k < n; ++k) {
          out << ",";
          detail::write_full_precision(out, artifacts.samples[i].x[k]);
        }
        for (int k = 0; k < n; ++k) {
          out << ",";
          detail::write_full_precision(out, artifacts.samples[i].y[k]);
        }
        out << "\n";
      }
      written.push_back(p.string());
    }
    {
      const fs::path p = fs::path(outdir) / "simplices.csv";
      std::ofstream out(p);
      const int n = artifacts.cover->dimension();
      out << "id";
      for (int i = 0; i <= n; ++i) out << ",v" << i;
      out << "\n";
      for (int id : artifacts.cover->alive_ids()) {
        out << id;
        for (int v : artifacts.cover->simplex(id).vertices) out << "," << v;
        out << "\n";
      }
      written.push_back(p.string());
    }
  }

  if (include_data && report.candidate) {
    const RegionOfInterest roi = report.config.roi
                                     ? *report.config.roi
                                     : find_benchmark(report.config.system_name)
                                           ->default_roi();
    const fs::path p = fs::path(outdir) / "level_set.csv";
    std::ofstream out(p);
    const int n = roi.dimension();
    Vector lo, hi;
    roi.bounding_box(lo, hi);
    const int per_axis = n == 2 ? 201 : 41;
    out << "v";
    for (int i = 0; i < n; ++i) out << ",x" << i;
    out << "\n";
    std::vector<int> idx(static_cast<size_t>(n), 0);
    while (true) {
      Vector x(n);
      for (int i = 0; i < n; ++i) {
        const double span = hi[i] - lo[i];
        x[i] = (lo[i] - 0.125 * span) +
               1.25 * span * idx[static_cast<size_t>(i)] / (per_axis - 1);
      }
      detail::write_full_precision(out, evaluate_v(*report.candidate, x));
      for (int i = 0; i < n; ++i) {
        out << ",";
        detail::write_full_precision(out, x[i]);
      }
      out << "\n";
      int k = 0;
      while (k < n && idx[static_cast<size_t>(k)] == per_axis - 1) {
        idx[static_cast<size_t>(k)] = 0;
        ++k;
      }
      if (k == n) break;
      ++idx[static_cast<size_t>(k)];
    }
    written.push_back(p.string());
  }
  return written;
}

/// CLI exit codes per outcome.
inline int exit_code(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Found: return 0;
    case OutcomeKind::NoLyapunovInSpace: return 2;
    case OutcomeKind::NotDeltaProvable: return 3;
    case OutcomeKind::IterationLimit: return 4;
    case OutcomeKind::ResourceLimit: return 5;
  }
  return 1;
}

}  // namespace lyacert
