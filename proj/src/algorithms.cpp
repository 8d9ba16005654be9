#include "dsmd/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace dsmd {

namespace {

constexpr std::uint64_t kOracleTag = 0x6f72636c;  // "orcl"
constexpr std::uint64_t kInitTag = 0x696e6974;    // "init"

}  // namespace

OracleBank::OracleBank(const ProblemInstance& instance, std::uint64_t seed) {
  oracles_.reserve(instance.objectives.size());
  for (std::size_t i = 0; i < instance.objectives.size(); ++i) {
    oracles_.emplace_back(instance.objectives[i], instance.noise_std,
                          mix64(seed, kOracleTag, i));
  }
}

Point OracleBank::gradient(int agent, const Point& x) {
  return oracles_.at(static_cast<std::size_t>(agent)).noisy_subgradient(x);
}

double step_excess(const Point& x, const Point& g, const Point& z, double eta,
                   double sigma_phi) {
  return (z - x).norm() - (eta / sigma_phi) * g.norm();
}

// ── Engine ──────────────────────────────────────────────────────────

namespace {

// Shared round machinery for the plain and epoch drivers. Iterates live as
// columns of a d x m matrix so the mixing step is one matrix product.
class Engine {
 public:
  Engine(const MirrorGeometry& geom, const ConstraintSet& set,
         const MixingSchedule& sched, GradientSource& grads, const RunOptions& opts)
      : geom_(geom), set_(set), sched_(sched), grads_(grads),
        m_(sched.m), d_(set.dim()) {
    check_pairing(geom, set);
    if (opts.T < 1) {
      throw std::invalid_argument("run: round budget must be >= 1");
    }
    cps_ = opts.checkpoints;
    std::sort(cps_.begin(), cps_.end());
    cps_.erase(std::unique(cps_.begin(), cps_.end()), cps_.end());
    if (!cps_.empty() && (cps_.front() < 1 || cps_.back() > opts.T)) {
      throw std::invalid_argument("run: checkpoints must lie in [1, T]");
    }
    X_.resize(d_, m_);
    Z_.resize(d_, m_);
    if (!opts.initial_points.empty()) {
      if (static_cast<int>(opts.initial_points.size()) != m_) {
        throw std::invalid_argument("run: need one initial point per agent");
      }
      for (int i = 0; i < m_; ++i) {
        if (!set_.contains(opts.initial_points[static_cast<std::size_t>(i)])) {
          throw std::invalid_argument("run: initial point outside the feasible set");
        }
        X_.col(i) = opts.initial_points[static_cast<std::size_t>(i)];
      }
    } else if (opts.random_init) {
      Rng rng(mix64(opts.init_seed, kInitTag));
      for (int i = 0; i < m_; ++i) X_.col(i) = sample_point(set_, rng);
    } else {
      const Point start = phi_minimizer(geom_, set_);
      for (int i = 0; i < m_; ++i) X_.col(i) = start;
    }
    S_ = Matrix::Zero(d_, m_);
    track_disagreement_ = opts.track_disagreement;
    if (track_disagreement_) {
      res_.cumulative_disagreement.assign(static_cast<std::size_t>(m_), 0.0);
    }
    for (int i = 0; i < m_; ++i) res_.initial_norm_sum += X_.col(i).norm();
  }

  // One algorithm round at global index t with step size eta; false on abort.
  bool round(long t, double eta) {
    S_ += X_;
    ++span_;
    if (track_disagreement_) accumulate_disagreement();
    if (next_cp_ < cps_.size() && cps_[next_cp_] == t) take_snapshot(t, eta);
    for (int i = 0; i < m_; ++i) {
      const Point x = X_.col(i);
      const Point g = grads_.gradient(i, x);
      if (!is_finite(g)) return abort(t, "non-finite gradient estimate");
      Point z;
      try {
        z = geom_.kind == GeometryKind::NegativeEntropy
                ? entropic_step(x, g, eta, geom_.entropy_floor)
                : mirror_step(geom_, set_, x, g, eta);
      } catch (const std::runtime_error& e) {
        return abort(t, e.what());
      }
      res_.max_step_excess =
          std::max(res_.max_step_excess, step_excess(x, g, z, eta, geom_.sigma_phi));
      if (!set_.contains(z, 1e-9)) {
        return abort(t, "post-step point left the feasible set");
      }
      Z_.col(i) = z;
    }
    const Matrix A = sample_matrix(sched_, t);
    X_.noalias() = Z_ * A.transpose();
    if (!X_.allFinite()) return abort(t, "non-finite iterate after mixing");
    res_.sum_eta += eta;
    ++res_.rounds;
    return true;
  }

  void reset_averaging_span() {
    S_.setZero();
    span_ = 0;
  }

  void warm_start_from_average() {
    X_ = S_ / static_cast<double>(span_);
  }

  RunResult finish() {
    res_.final_x.reserve(static_cast<std::size_t>(m_));
    res_.final_avg.reserve(static_cast<std::size_t>(m_));
    const double denom = span_ > 0 ? static_cast<double>(span_) : 1.0;
    for (int i = 0; i < m_; ++i) {
      res_.final_x.push_back(X_.col(i));
      res_.final_avg.push_back(span_ > 0 ? Point(S_.col(i) / denom) : Point(X_.col(i)));
    }
    return std::move(res_);
  }

  RunResult& result() { return res_; }

 private:
  bool abort(long t, std::string reason) {
    res_.aborted = true;
    res_.abort_round = t;
    res_.abort_reason = std::move(reason);
    return false;
  }

  void take_snapshot(long t, double eta) {
    CheckpointSnapshot snap;
    snap.t = t;
    snap.eta = eta;
    snap.x.reserve(static_cast<std::size_t>(m_));
    snap.avg.reserve(static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) {
      snap.x.push_back(X_.col(i));
      snap.avg.push_back(Point(S_.col(i) / static_cast<double>(span_)));
    }
    res_.snapshots.push_back(std::move(snap));
    ++next_cp_;
  }

  void accumulate_disagreement() {
    for (int j = 0; j < m_; ++j) {
      double s = 0.0;
      for (int i = 0; i < m_; ++i) {
        if (i != j) s += (X_.col(i) - X_.col(j)).norm();
      }
      res_.cumulative_disagreement[static_cast<std::size_t>(j)] += s;
    }
  }

  const MirrorGeometry& geom_;
  const ConstraintSet& set_;
  const MixingSchedule& sched_;
  GradientSource& grads_;
  int m_, d_;
  Matrix X_, Z_, S_;  // iterates, post-step points, running sums
  long span_ = 0;     // rounds accumulated into S_
  std::vector<long> cps_;
  std::size_t next_cp_ = 0;
  bool track_disagreement_ = false;
  RunResult res_;
};

void require_positive_sigma_F(double sigma_F) {
  if (!(sigma_F > 0.0)) {
    throw std::invalid_argument("run: sigma_F must be positive");
  }
}

}  // namespace

RunResult run_dsmd(const MirrorGeometry& geom, const ConstraintSet& set,
                   const MixingSchedule& sched, GradientSource& grads,
                   double sigma_F, const RunOptions& opts) {
  require_positive_sigma_F(sigma_F);
  Engine engine(geom, set, sched, grads, opts);
  for (long t = 1; t <= opts.T; ++t) {
    if (!engine.round(t, 1.0 / (sigma_F * static_cast<double>(t)))) break;
  }
  return engine.finish();
}

RunResult run_epoch_dsmd(const MirrorGeometry& geom, const ConstraintSet& set,
                         const MixingSchedule& sched, GradientSource& grads,
                         double sigma_F, const RunOptions& opts) {
  const EpochSchedule schedule = epoch_schedule(opts.T, sigma_F);
  Engine engine(geom, set, sched, grads, opts);
  long t = 1;
  for (const Epoch& epoch : schedule.epochs) {
    engine.reset_averaging_span();
    bool ok = true;
    for (long s = 0; s < epoch.rounds && ok; ++s, ++t) {
      ok = engine.round(t, epoch.eta);
    }
    if (!ok) break;
    engine.warm_start_from_average();
    ++engine.result().epochs_completed;
  }
  return engine.finish();
}

RunResult run_dsps(const ConstraintSet& set, const MixingSchedule& sched,
                   GradientSource& grads, double sigma_F, const RunOptions& opts) {
  return run_dsmd(MirrorGeometry::euclidean(), set, sched, grads, sigma_F, opts);
}

// ── Epoch bookkeeping ───────────────────────────────────────────────

EpochSchedule epoch_schedule(long T, double sigma_F) {
  if (T < 4) throw std::invalid_argument("epoch_schedule: budget must be >= 4 rounds");
  require_positive_sigma_F(sigma_F);
  EpochSchedule schedule;
  long horizon = 4;
  double eta = 1.0 / sigma_F;
  long cumulative = 0;
  while (cumulative + horizon <= T) {
    schedule.epochs.push_back({horizon, eta});
    cumulative += horizon;
    horizon *= 2;
    eta *= 0.5;
  }
  schedule.k_dagger = static_cast<int>(schedule.epochs.size());
  schedule.total_rounds = cumulative;
  return schedule;
}

// ── Convergence bound evaluation ────────────────────────────────────

TheoremConstants compute_constants(double G, double sigma_F, double sigma_phi,
                                   const MixingConstants& mix, int m, double R_X,
                                   double R_PhiX, double initial_norm_sum) {
  if (!(G > 0.0) || !(sigma_F > 0.0) || !(sigma_phi > 0.0) || m < 1 ||
      !(mix.beta > 0.0) || !(mix.beta < 1.0) || !(mix.alpha >= 1.0)) {
    throw std::invalid_argument("compute_constants: inputs out of range");
  }
  TheoremConstants k;
  k.G = G;
  k.sigma_F = sigma_F;
  k.sigma_phi = sigma_phi;
  k.alpha = mix.alpha;
  k.beta = mix.beta;
  k.m = m;
  k.R_X = R_X;
  k.R_PhiX = R_PhiX;
  k.initial_norm_sum = initial_norm_sum;
  const double md = static_cast<double>(m);
  const double ab = mix.alpha * mix.beta;
  const double geo = 2.0 * ab / (1.0 - mix.beta) + 1.0;
  k.c = (2.0 * G * G / (sigma_F * sigma_F * sigma_phi)) *
        (1.0 + 4.0 * ab * md / ((1.0 - mix.beta) * sigma_phi));
  k.c_prime = (2.0 * G / (sigma_F * sigma_phi)) * geo * initial_norm_sum;
  k.c1 = md * G * geo * (md * R_X + initial_norm_sum);
  k.c2 = md * G * G / 2.0 + 2.0 * ab * md * md * G * G / ((1.0 - mix.beta) * sigma_phi);
  k.c_hat = std::max((sigma_F * k.c1 + 4.0 * k.c2) / (4.0 * sigma_F * sigma_F * sigma_phi),
                     md * R_PhiX * R_PhiX / (4.0 * sigma_phi));
  return k;
}

double theorem1_bound(const TheoremConstants& k, long T) {
  if (T < 3) throw std::invalid_argument("theorem1_bound: valid for T >= 3");
  const double Td = static_cast<double>(T);
  return k.c * std::log(Td) / Td + k.c_prime / Td;
}

double theorem2_bound(const TheoremConstants& k, long T) {
  if (T < 4) throw std::invalid_argument("theorem2_bound: valid for T >= 4");
  return 64.0 * k.c_hat / static_cast<double>(T);
}

double lemma1_bound(const TheoremConstants& k, double sum_eta) {
  const double md = static_cast<double>(k.m);
  const double ab = k.alpha * k.beta;
  const double geo = 2.0 * ab / (1.0 - k.beta) + 1.0;
  return md * geo * k.initial_norm_sum +
         2.0 * ab * md * md * k.G / ((1.0 - k.beta) * k.sigma_phi) * sum_eta;
}

}  // namespace dsmd
