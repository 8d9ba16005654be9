#include "dsmd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace dsmd {

namespace {

constexpr std::uint64_t kNetTag = 0x6e6574;      // "net"
constexpr std::uint64_t kNoiseTag = 0x6e6f6973;  // "nois"

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

// ── Config plumbing ─────────────────────────────────────────────────

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Dsmd: return "dsmd";
    case Algorithm::EpochDsmd: return "epoch-dsmd";
    case Algorithm::Dsps: return "dsps";
  }
  throw std::logic_error("to_string: bad Algorithm value");
}

std::string to_string(Constraint c) {
  return c == Constraint::Simplex ? "simplex" : "box";
}

std::string to_string(GeometryChoice g) {
  switch (g) {
    case GeometryChoice::Auto: return "auto";
    case GeometryChoice::Euclidean: return "euclidean";
    case GeometryChoice::Entropic: return "entropic";
  }
  throw std::logic_error("to_string: bad GeometryChoice value");
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "dsmd") return Algorithm::Dsmd;
  if (s == "epoch-dsmd") return Algorithm::EpochDsmd;
  if (s == "dsps") return Algorithm::Dsps;
  throw std::invalid_argument("unknown algorithm '" + s +
                              "' (expected dsmd, epoch-dsmd, or dsps)");
}

Constraint constraint_from_string(const std::string& s) {
  if (s == "simplex") return Constraint::Simplex;
  if (s == "box") return Constraint::Box;
  throw std::invalid_argument("unknown constraint '" + s +
                              "' (expected simplex or box)");
}

GeometryChoice geometry_from_string(const std::string& s) {
  if (s == "auto") return GeometryChoice::Auto;
  if (s == "euclidean") return GeometryChoice::Euclidean;
  if (s == "entropic") return GeometryChoice::Entropic;
  throw std::invalid_argument("unknown geometry '" + s +
                              "' (expected auto, euclidean, or entropic)");
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return nlohmann::json{
      {"algorithm", to_string(c.algorithm)},
      {"constraint", to_string(c.constraint)},
      {"geometry", to_string(c.geometry)},
      {"m", c.m},
      {"d", c.d},
      {"sigma", c.sigma},
      {"T", c.T},
      {"realizations", c.realizations},
      {"activation", c.activation},
      {"B", c.B},
      {"master_seed", c.master_seed},
      {"checkpoints", c.checkpoints},
      {"output", c.output},
      {"box_lower", c.box_lower},
      {"box_upper", c.box_upper},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const char* known[] = {"algorithm",  "constraint",   "geometry",
                                "m",          "d",            "sigma",
                                "T",          "realizations", "activation",
                                "B",          "master_seed",  "checkpoints",
                                "output",     "box_lower",    "box_upper"};
  for (const auto& item : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
          return item.key() == k;
        }) == std::end(known)) {
      throw std::invalid_argument("config: unknown key '" + item.key() + "'");
    }
  }
  ExperimentConfig c;
  if (j.contains("algorithm")) c.algorithm = algorithm_from_string(j.at("algorithm"));
  if (j.contains("constraint")) c.constraint = constraint_from_string(j.at("constraint"));
  if (j.contains("geometry")) c.geometry = geometry_from_string(j.at("geometry"));
  c.m = j.value("m", c.m);
  c.d = j.value("d", c.d);
  c.sigma = j.value("sigma", c.sigma);
  c.T = j.value("T", c.T);
  c.realizations = j.value("realizations", c.realizations);
  c.activation = j.value("activation", c.activation);
  c.B = j.value("B", c.B);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.checkpoints = j.value("checkpoints", c.checkpoints);
  c.output = j.value("output", c.output);
  c.box_lower = j.value("box_lower", c.box_lower);
  c.box_upper = j.value("box_upper", c.box_upper);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config file " + path + ": " + e.what());
  }
  return config_from_json(j);
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  if (c.m < 1) errors.push_back("nodes: need m >= 1");
  if (c.d < 1) errors.push_back("dim: need d >= 1");
  if (!(c.sigma >= 0.0)) errors.push_back("sigma: noise level must be >= 0");
  if (c.T < 1) errors.push_back("iters: need T >= 1");
  if (c.algorithm == Algorithm::EpochDsmd && c.T < 4) {
    errors.push_back("iters: epoch-dsmd needs T >= 4 to complete its first epoch");
  }
  if (c.realizations < 1) errors.push_back("realizations: need at least 1");
  if (!(c.activation > 0.0) || c.activation > 1.0) {
    errors.push_back("activation: must lie in (0, 1]");
  }
  if (c.B < 1) errors.push_back("window-B: must be >= 1");
  if (c.constraint == Constraint::Box && !(c.box_lower < c.box_upper)) {
    errors.push_back("box bounds: lower must be strictly below upper");
  }
  if (c.geometry == GeometryChoice::Entropic) {
    if (c.constraint == Constraint::Box) {
      errors.push_back(
          "geometry: the entropic geometry is only defined on the simplex; "
          "pair the box constraint with euclidean");
    }
    if (c.algorithm == Algorithm::Dsps) {
      errors.push_back(
          "geometry: dsps is the Euclidean projected-subgradient baseline and "
          "cannot run with the entropic geometry");
    }
  }
  long reachable = c.T;
  if (c.algorithm == Algorithm::EpochDsmd && c.T >= 4) {
    // total_rounds depends only on T, so any positive modulus works here
    reachable = epoch_schedule(c.T, 1.0).total_rounds;
  }
  for (long t : c.checkpoints) {
    if (t < 1 || t > c.T) {
      errors.push_back("checkpoints: t=" + std::to_string(t) + " outside [1, T]");
    } else if (t > reachable) {
      errors.push_back("checkpoints: t=" + std::to_string(t) +
                       " is never reached; whole epochs cover only " +
                       std::to_string(reachable) + " of the " +
                       std::to_string(c.T) + " budgeted rounds");
    }
  }
  return errors;
}

MirrorGeometry resolve_geometry(const ExperimentConfig& c) {
  switch (c.geometry) {
    case GeometryChoice::Euclidean: return MirrorGeometry::euclidean();
    case GeometryChoice::Entropic: return MirrorGeometry::negative_entropy();
    case GeometryChoice::Auto: break;
  }
  if (c.algorithm == Algorithm::Dsps) return MirrorGeometry::euclidean();
  return c.constraint == Constraint::Simplex ? MirrorGeometry::negative_entropy()
                                             : MirrorGeometry::euclidean();
}

ConstraintSet make_constraint(const ExperimentConfig& c) {
  return c.constraint == Constraint::Simplex
             ? ConstraintSet::simplex(c.d)
             : ConstraintSet::box_uniform(c.d, c.box_lower, c.box_upper);
}

std::vector<long> effective_checkpoints(const ExperimentConfig& c) {
  std::vector<long> cps;
  if (!c.checkpoints.empty()) {
    cps = c.checkpoints;
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    return cps;
  }
  if (c.algorithm == Algorithm::EpochDsmd) {
    long cumulative = 0;
    for (const Epoch& e : epoch_schedule(c.T, 1.0).epochs) {
      cumulative += e.rounds;
      cps.push_back(cumulative);
    }
  } else {
    for (long t = 1; t <= c.T; t *= 2) cps.push_back(t);
    if (cps.back() != c.T) cps.push_back(c.T);
  }
  return cps;
}

// ── Monte Carlo study ───────────────────────────────────────────────

namespace {

struct RealizationOutput {
  std::vector<MetricRecord> records;
  double sum_eta = 0.0;
  double initial_norm_sum = 0.0;
  double worst_cumulative_disagreement = 0.0;
};

double node_disagreement(const std::vector<Point>& xs, int j) {
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (static_cast<int>(i) != j) s += (xs[i] - xs[static_cast<std::size_t>(j)]).norm();
  }
  return s;
}

RealizationOutput run_one(const ExperimentConfig& cfg, const MirrorGeometry& geom,
                          const ConstraintSet& set, const ProblemInstance& instance,
                          const Point& x_star, const std::vector<long>& cps, int r,
                          bool track_disagreement) {
  const MixingSchedule sched =
      make_ring_schedule(cfg.m, cfg.activation, cfg.B,
                         mix64(cfg.master_seed, kNetTag, static_cast<std::uint64_t>(r)));
  OracleBank bank(instance,
                  mix64(cfg.master_seed, kNoiseTag, static_cast<std::uint64_t>(r)));
  RunOptions opts;
  opts.T = cfg.T;
  opts.checkpoints = cps;
  opts.track_disagreement = track_disagreement;
  RunResult run = [&] {
    switch (cfg.algorithm) {
      case Algorithm::EpochDsmd:
        return run_epoch_dsmd(geom, set, sched, bank, instance.sigma_F, opts);
      case Algorithm::Dsps:
        return run_dsps(set, sched, bank, instance.sigma_F, opts);
      case Algorithm::Dsmd:
      default:
        return run_dsmd(geom, set, sched, bank, instance.sigma_F, opts);
    }
  }();
  if (run.aborted) {
    throw std::runtime_error("realization " + std::to_string(r) + " aborted at round " +
                             std::to_string(run.abort_round) + ": " + run.abort_reason);
  }
  RealizationOutput out;
  out.sum_eta = run.sum_eta;
  out.initial_norm_sum = run.initial_norm_sum;
  for (double v : run.cumulative_disagreement) {
    out.worst_cumulative_disagreement = std::max(out.worst_cumulative_disagreement, v);
  }
  out.records.reserve(run.snapshots.size() * static_cast<std::size_t>(cfg.m));
  for (const CheckpointSnapshot& snap : run.snapshots) {
    for (int j = 0; j < cfg.m; ++j) {
      MetricRecord rec;
      rec.realization = r;
      rec.t = snap.t;
      rec.node = j;
      rec.avg_error_sq = (snap.avg[static_cast<std::size_t>(j)] - x_star).squaredNorm();
      rec.last_error_sq = (snap.x[static_cast<std::size_t>(j)] - x_star).squaredNorm();
      rec.disagreement = node_disagreement(snap.x, j);
      rec.eta = snap.eta;
      out.records.push_back(rec);
    }
  }
  return out;
}

std::vector<RealizationOutput> run_all(const ExperimentConfig& cfg,
                                       const MirrorGeometry& geom,
                                       const ConstraintSet& set,
                                       const ProblemInstance& instance,
                                       const Point& x_star,
                                       const std::vector<long>& cps,
                                       bool track_disagreement) {
  const int total = cfg.realizations;
  std::vector<RealizationOutput> outputs(static_cast<std::size_t>(total));
  std::vector<std::string> failures(static_cast<std::size_t>(total));
  std::atomic<int> next{0};
  auto work = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= total) return;
      try {
        outputs[static_cast<std::size_t>(r)] =
            run_one(cfg, geom, set, instance, x_star, cps, r, track_disagreement);
      } catch (const std::exception& e) {
        failures[static_cast<std::size_t>(r)] = e.what();
      }
    }
  };
  unsigned workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(total));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures) {
    if (!f.empty()) throw std::runtime_error(f);
  }
  return outputs;
}

void throw_if_invalid(const ExperimentConfig& cfg) {
  const auto errors = validate(cfg);
  if (errors.empty()) return;
  std::string msg = "invalid experiment config:";
  for (const auto& e : errors) msg += "\n  - " + e;
  throw std::invalid_argument(msg);
}

TheoremConstants study_constants(const ExperimentConfig& cfg, const MirrorGeometry& geom,
                                 const ConstraintSet& set, const ProblemInstance& instance,
                                 double initial_norm_sum) {
  const MixingSchedule proto =
      make_ring_schedule(cfg.m, cfg.activation, cfg.B, cfg.master_seed);
  // A single node has xi = 1 and exact consensus; any xi < 1 yields a valid
  // (trivially loose) set of mixing constants there.
  const double xi = proto.xi < 1.0 ? proto.xi : 0.5;
  const MixingConstants mix = mixing_constants(xi, cfg.m, cfg.B);
  return compute_constants(instance.G, instance.sigma_F, geom.sigma_phi, mix, cfg.m,
                           euclidean_diameter(set), phi_diameter(geom, set),
                           initial_norm_sum);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out.good()) throw std::runtime_error("failed writing output file: " + path);
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

template <typename Int>
void append_integer(std::string& out, Int v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string render_csv(const std::vector<MetricRecord>& records) {
  std::string out = "realization,t,node,avg_error_sq,last_error_sq,disagreement,eta\n";
  out.reserve(out.size() + records.size() * 64);
  for (const MetricRecord& r : records) {
    append_integer(out, r.realization);
    out.push_back(',');
    append_integer(out, r.t);
    out.push_back(',');
    append_integer(out, r.node);
    out.push_back(',');
    append_number(out, r.avg_error_sq);
    out.push_back(',');
    append_number(out, r.last_error_sq);
    out.push_back(',');
    append_number(out, r.disagreement);
    out.push_back(',');
    append_number(out, r.eta);
    out.push_back('\n');
  }
  return out;
}

std::string summary_path(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return csv_path.substr(0, csv_path.size() - suffix.size()) + ".summary.json";
  }
  return csv_path + ".summary.json";
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  throw_if_invalid(cfg);
  const MirrorGeometry geom = resolve_geometry(cfg);
  const ConstraintSet set = make_constraint(cfg);
  const ProblemInstance instance =
      make_instance(cfg.m, set, geom, cfg.sigma, cfg.master_seed);
  const Point x_star = global_optimum(instance);
  const std::vector<long> cps = effective_checkpoints(cfg);
  std::vector<RealizationOutput> outputs =
      run_all(cfg, geom, set, instance, x_star, cps, false);

  ExperimentResult result;
  result.constants =
      study_constants(cfg, geom, set, instance, outputs.front().initial_norm_sum);
  for (auto& out : outputs) {
    result.records.insert(result.records.end(), out.records.begin(), out.records.end());
  }
  std::sort(result.records.begin(), result.records.end(),
            [](const MetricRecord& a, const MetricRecord& b) {
              return std::tie(a.realization, a.t, a.node) <
                     std::tie(b.realization, b.t, b.node);
            });

  // per checkpoint: mean over nodes within a realization, then moments
  // across realizations
  const std::size_t n_cps = cps.size();
  const int reals = cfg.realizations;
  std::vector<std::vector<double>> samples(n_cps,
                                           std::vector<double>(static_cast<std::size_t>(reals), 0.0));
  for (const MetricRecord& rec : result.records) {
    const auto it = std::lower_bound(cps.begin(), cps.end(), rec.t);
    const auto k = static_cast<std::size_t>(it - cps.begin());
    samples[k][static_cast<std::size_t>(rec.realization)] +=
        rec.avg_error_sq / static_cast<double>(cfg.m);
  }
  result.stats.reserve(n_cps);
  for (std::size_t k = 0; k < n_cps; ++k) {
    CheckpointStats st;
    st.t = cps[k];
    double sum = 0.0;
    for (double v : samples[k]) sum += v;
    st.mean = sum / static_cast<double>(reals);
    if (reals > 1) {
      double ss = 0.0;
      for (double v : samples[k]) ss += (v - st.mean) * (v - st.mean);
      st.std_error = std::sqrt(ss / static_cast<double>(reals - 1)) /
                     std::sqrt(static_cast<double>(reals));
    }
    st.theorem_bound = kNaN;
    if (cfg.algorithm == Algorithm::EpochDsmd) {
      if (st.t >= 4) st.theorem_bound = theorem2_bound(result.constants, st.t);
    } else if (st.t >= 3) {
      st.theorem_bound = theorem1_bound(result.constants, st.t);
    }
    result.stats.push_back(st);
  }

  nlohmann::json summary;
  summary["config"] = config_to_json(cfg);
  summary["constants"] = {
      {"sigma_F", instance.sigma_F}, {"G", instance.G},
      {"alpha", result.constants.alpha}, {"beta", result.constants.beta},
      {"c", result.constants.c}, {"c_prime", result.constants.c_prime},
      {"c1", result.constants.c1}, {"c2", result.constants.c2},
      {"c_hat", result.constants.c_hat},
  };
  summary["checkpoints"] = nlohmann::json::array();
  for (const CheckpointStats& st : result.stats) {
    nlohmann::json row = {{"t", st.t}, {"mean", st.mean}, {"stderr", st.std_error}};
    if (std::isfinite(st.theorem_bound)) {
      row["theorem_bound"] = st.theorem_bound;
    } else {
      row["theorem_bound"] = nullptr;
    }
    summary["checkpoints"].push_back(row);
  }
  summary["fit"] = nullptr;
  if (n_cps >= 4 && cps.back() >= 4 * cps.front()) {
    std::vector<double> means;
    means.reserve(n_cps);
    for (const CheckpointStats& st : result.stats) means.push_back(st.mean);
    const RateModel model = cfg.algorithm == Algorithm::EpochDsmd
                                ? RateModel::OneOverT
                                : RateModel::LnTOverT;
    const RateFit fit = rate_fit(cps, means, model);
    summary["fit"] = {
        {"model", model == RateModel::OneOverT ? "one_over_T" : "lnT_over_T"},
        {"a", fit.a},
        {"b", fit.b},
        {"r_squared", fit.r_squared},
        {"max_ratio", fit.max_ratio},
    };
  }
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  summary["runtime_seconds"] = result.runtime_seconds;
  result.summary = std::move(summary);

  if (!cfg.output.empty()) {
    write_text_file(cfg.output, render_csv(result.records));
    write_text_file(summary_path(cfg.output), result.summary.dump(2) + "\n");
  }
  return result;
}

RateFit rate_fit(const std::vector<long>& ts, const std::vector<double>& means,
                 RateModel model) {
  if (ts.size() != means.size()) {
    throw std::invalid_argument("rate_fit: checkpoint/value length mismatch");
  }
  if (ts.size() < 4) {
    throw std::invalid_argument("rate_fit: need at least 4 checkpoints");
  }
  const auto [mn_it, mx_it] = std::minmax_element(ts.begin(), ts.end());
  if (*mn_it < 1 || *mx_it < 4 * *mn_it) {
    throw std::invalid_argument("rate_fit: checkpoints must span at least two octaves");
  }
  const std::size_t n = ts.size();
  RateFit fit;
  fit.model = model;
  std::vector<double> pred(n, 0.0);
  if (model == RateModel::OneOverT) {
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 1.0 / static_cast<double>(ts[i]);
      sxx += x * x;
      sxy += x * means[i];
    }
    fit.a = sxy / sxx;
    fit.b = 0.0;
    for (std::size_t i = 0; i < n; ++i) pred[i] = fit.a / static_cast<double>(ts[i]);
  } else {
    Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(ts[i]);
      const double u = std::log(t) / t;
      const double v = 1.0 / t;
      M(0, 0) += u * u;
      M(0, 1) += u * v;
      M(1, 1) += v * v;
      rhs(0) += u * means[i];
      rhs(1) += v * means[i];
    }
    M(1, 0) = M(0, 1);
    const Eigen::Vector2d sol = M.fullPivLu().solve(rhs);
    fit.a = sol(0);
    fit.b = sol(1);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(ts[i]);
      pred[i] = fit.a * std::log(t) / t + fit.b / t;
    }
  }
  double mean_y = 0.0;
  for (double y : means) mean_y += y;
  mean_y /= static_cast<double>(n);
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ss_tot += (means[i] - mean_y) * (means[i] - mean_y);
    ss_res += (means[i] - pred[i]) * (means[i] - pred[i]);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res < 1e-24 ? 1.0 : 0.0);
  fit.max_ratio = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(ts[i]);
    if (model == RateModel::OneOverT) {
      fit.max_ratio = std::max(fit.max_ratio, means[i] * t);
    } else if (ts[i] >= 2) {
      fit.max_ratio = std::max(fit.max_ratio, means[i] * t / std::log(t));
    }
  }
  return fit;
}

DisagreementReport disagreement_report(const ExperimentConfig& cfg) {
  throw_if_invalid(cfg);
  const MirrorGeometry geom = resolve_geometry(cfg);
  const ConstraintSet set = make_constraint(cfg);
  const ProblemInstance instance =
      make_instance(cfg.m, set, geom, cfg.sigma, cfg.master_seed);
  const Point x_star = global_optimum(instance);
  std::vector<RealizationOutput> outputs =
      run_all(cfg, geom, set, instance, x_star, {}, true);
  const TheoremConstants constants =
      study_constants(cfg, geom, set, instance, outputs.front().initial_norm_sum);
  DisagreementReport rep;
  for (const RealizationOutput& out : outputs) {
    rep.lhs += out.worst_cumulative_disagreement;
  }
  rep.lhs /= static_cast<double>(outputs.size());
  rep.rhs = lemma1_bound(constants, outputs.front().sum_eta);
  rep.ratio = rep.rhs > 0.0
                  ? rep.lhs / rep.rhs
                  : (rep.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return rep;
}

}  // namespace dsmd
