#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <stdexcept>

#include "dsmd/algorithms.hpp"

using namespace dsmd;

namespace {

Point pt2(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

// Gradient source that turns sour after a fixed number of queries.
class PoisonedGradient : public GradientSource {
 public:
  PoisonedGradient(int dim, int good_calls) : dim_(dim), good_(good_calls) {}
  Point gradient(int, const Point&) override {
    if (++calls_ > good_) {
      return Point::Constant(dim_, std::numeric_limits<double>::quiet_NaN());
    }
    return Point::Zero(dim_);
  }

 private:
  int dim_, good_, calls_ = 0;
};

// Reference implementation assembled directly from the public primitives:
// accumulate, query, mirror step, Metropolis mixing. Deliberately kept as a
// plain loop so run_dsmd has something independent to match.
struct ManualRun {
  Matrix final_x;
  Matrix final_avg;
  Matrix cp_x;    // iterates at cp_round
  Matrix cp_avg;  // running averages at cp_round
};

ManualRun manual_dsmd(const MirrorGeometry& geom, const ConstraintSet& set,
                      const MixingSchedule& sched, GradientSource& grads,
                      double sigma_F, long T, long cp_round) {
  const int m = sched.m;
  const int d = set.dim();
  Matrix X(d, m), Z(d, m), S = Matrix::Zero(d, m);
  for (int i = 0; i < m; ++i) X.col(i) = phi_minimizer(geom, set);
  ManualRun out;
  for (long t = 1; t <= T; ++t) {
    S += X;
    if (t == cp_round) {
      out.cp_x = X;
      out.cp_avg = S / static_cast<double>(t);
    }
    const double eta = 1.0 / (sigma_F * static_cast<double>(t));
    for (int i = 0; i < m; ++i) {
      const Point x = X.col(i);
      const Point g = grads.gradient(i, x);
      Z.col(i) = geom.kind == GeometryKind::NegativeEntropy
                     ? entropic_step(x, g, eta, geom.entropy_floor)
                     : mirror_step(geom, set, x, g, eta);
    }
    const Matrix A = sample_matrix(sched, t);
    X = (Z * A.transpose()).eval();
  }
  out.final_x = X;
  out.final_avg = S / static_cast<double>(T);
  return out;
}

double max_col_diff(const Matrix& a, const std::vector<Point>& b) {
  double worst = 0.0;
  for (int i = 0; i < a.cols(); ++i) {
    worst = std::max(worst, (a.col(i) - b[static_cast<std::size_t>(i)]).norm());
  }
  return worst;
}

}  // namespace

TEST_CASE("epoch schedules double horizons and halve step sizes") {
  {
    const EpochSchedule s = epoch_schedule(4, 2.0);
    REQUIRE(s.epochs.size() == 1);
    CHECK(s.epochs[0].rounds == 4);
    CHECK(s.epochs[0].eta == 0.5);
    CHECK(s.k_dagger == 1);
    CHECK(s.total_rounds == 4);
  }
  {
    const EpochSchedule s = epoch_schedule(60, 1.0);
    REQUIRE(s.epochs.size() == 4);
    CHECK(s.total_rounds == 60);
    CHECK(s.epochs[3].rounds == 32);
    CHECK(s.epochs[3].eta == 0.125);
  }
  {
    // one round short of the fourth epoch
    const EpochSchedule s = epoch_schedule(59, 1.0);
    CHECK(s.k_dagger == 3);
    CHECK(s.total_rounds == 28);
  }
  CHECK_THROWS_AS(epoch_schedule(3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(epoch_schedule(10, 0.0), std::invalid_argument);
}

TEST_CASE("epoch count matches the integer logarithm on random budgets") {
  Rng rng(606);
  for (int k = 0; k < 1000; ++k) {
    const long T = 4 + static_cast<long>(rng.below(1000000));
    const EpochSchedule s = epoch_schedule(T, 1.0);
    // floor(log2(T/4 + 1)) computed purely in integer arithmetic
    const auto level = static_cast<unsigned long long>((T + 4) / 4);
    const int expected = std::bit_width(level) - 1;
    REQUIRE(s.k_dagger == expected);
    long total = 0;
    long rounds = 4;
    double eta = 1.0;
    for (std::size_t l = 0; l < s.epochs.size(); ++l) {
      REQUIRE(s.epochs[l].rounds == rounds);
      REQUIRE(s.epochs[l].eta == eta);
      total += rounds;
      rounds *= 2;
      eta *= 0.5;
    }
    REQUIRE(s.total_rounds == total);
    REQUIRE(total == 4 * ((1L << s.k_dagger) - 1));
    REQUIRE(total <= T);
    REQUIRE(total + rounds > T);  // the next epoch would not have fit
  }
}

TEST_CASE("convergence-bound constants on hand-checked inputs") {
  const TheoremConstants k =
      compute_constants(2.0, 1.0, 1.0, MixingConstants{2.0, 0.5}, 3, 1.0, 1.0, 1.0);
  CHECK(k.c == doctest::Approx(200.0).epsilon(1e-14));
  CHECK(k.c_prime == doctest::Approx(20.0).epsilon(1e-14));
  CHECK(k.c1 == doctest::Approx(120.0).epsilon(1e-14));
  CHECK(k.c2 == doctest::Approx(150.0).epsilon(1e-14));
  CHECK(k.c_hat == doctest::Approx(180.0).epsilon(1e-14));
  CHECK(theorem1_bound(k, 3) == doctest::Approx(79.90748591120732).epsilon(1e-14));
  CHECK(theorem2_bound(k, 64) == doctest::Approx(180.0).epsilon(1e-14));
  CHECK(lemma1_bound(k, 2.0) == doctest::Approx(159.0).epsilon(1e-14));
  CHECK_THROWS_AS(theorem1_bound(k, 2), std::invalid_argument);
  CHECK_THROWS_AS(theorem2_bound(k, 3), std::invalid_argument);
  CHECK_THROWS_AS(
      compute_constants(2.0, 1.0, 1.0, MixingConstants{2.0, 1.0}, 3, 1.0, 1.0, 1.0),
      std::invalid_argument);
}

TEST_CASE("simulator matches a hand-rolled loop over the primitives") {
  const auto euclid = MirrorGeometry::euclidean();
  const auto box = ConstraintSet::box_uniform(4, -1, 1);
  const auto inst = make_instance(5, box, euclid, 0.3, 11);
  const auto sched = make_ring_schedule(5, 0.5, 2, 12);
  const long T = 30, cp = 7;

  OracleBank bank_a(inst, 13), bank_b(inst, 13);
  RunOptions opts;
  opts.T = T;
  opts.checkpoints = {cp};
  const RunResult run = run_dsmd(euclid, box, sched, bank_a, inst.sigma_F, opts);
  const ManualRun ref = manual_dsmd(euclid, box, sched, bank_b, inst.sigma_F, T, cp);

  REQUIRE(!run.aborted);
  CHECK(run.rounds == T);
  CHECK(max_col_diff(ref.final_x, run.final_x) <= 1e-12);
  CHECK(max_col_diff(ref.final_avg, run.final_avg) <= 1e-12);
  REQUIRE(run.snapshots.size() == 1);
  CHECK(run.snapshots[0].t == cp);
  CHECK(run.snapshots[0].eta == 1.0 / (inst.sigma_F * cp));
  CHECK(max_col_diff(ref.cp_x, run.snapshots[0].x) <= 1e-12);
  CHECK(max_col_diff(ref.cp_avg, run.snapshots[0].avg) <= 1e-12);

  double sum_eta = 0.0;
  for (long t = 1; t <= T; ++t) sum_eta += 1.0 / (inst.sigma_F * static_cast<double>(t));
  CHECK(run.sum_eta == doctest::Approx(sum_eta).epsilon(1e-14));
  CHECK(run.initial_norm_sum == 0.0);  // box center start
}

TEST_CASE("simulator matches the hand-rolled loop in the entropic geometry") {
  const auto entropy = MirrorGeometry::negative_entropy();
  const auto simplex = ConstraintSet::simplex(6);
  const auto inst = make_instance(4, simplex, entropy, 0.2, 21);
  const auto sched = make_ring_schedule(4, 0.5, 2, 22);
  const long T = 25;

  OracleBank bank_a(inst, 23), bank_b(inst, 23);
  RunOptions opts;
  opts.T = T;
  const RunResult run = run_dsmd(entropy, simplex, sched, bank_a, inst.sigma_F, opts);
  const ManualRun ref = manual_dsmd(entropy, simplex, sched, bank_b, inst.sigma_F, T, 0);

  REQUIRE(!run.aborted);
  CHECK(max_col_diff(ref.final_x, run.final_x) <= 1e-12);
  CHECK(max_col_diff(ref.final_avg, run.final_avg) <= 1e-12);
  for (const Point& p : run.final_x) CHECK(simplex.contains(p, 1e-9));
  for (const Point& p : run.final_avg) CHECK(simplex.contains(p, 1e-9));
}

TEST_CASE("epoch run warm-starts from per-agent epoch averages") {
  const auto euclid = MirrorGeometry::euclidean();
  const auto box = ConstraintSet::box_uniform(3, -1, 1);
  const auto inst = make_instance(4, box, euclid, 0.25, 31);
  const auto sched = make_ring_schedule(4, 0.5, 2, 32);
  const long T = 12;  // epochs of 4 and 8 rounds

  // hand-rolled epoch loop over the same primitives
  OracleBank bank_ref(inst, 33);
  const int m = 4, d = 3;
  Matrix X = Matrix::Zero(d, m), Z(d, m), S(d, m);
  long t = 1;
  for (const Epoch& epoch : epoch_schedule(T, inst.sigma_F).epochs) {
    S.setZero();
    for (long s = 0; s < epoch.rounds; ++s, ++t) {
      S += X;
      for (int i = 0; i < m; ++i) {
        const Point x = X.col(i);
        Z.col(i) = mirror_step(euclid, box, x, bank_ref.gradient(i, x), epoch.eta);
      }
      const Matrix A = sample_matrix(sched, t);
      X = (Z * A.transpose()).eval();
    }
    X = S / static_cast<double>(epoch.rounds);
  }

  OracleBank bank(inst, 33);
  RunOptions opts;
  opts.T = T;
  opts.checkpoints = {4, 5, 12};
  const RunResult run = run_epoch_dsmd(euclid, box, sched, bank, inst.sigma_F, opts);
  REQUIRE(!run.aborted);
  CHECK(run.rounds == T);
  CHECK(run.epochs_completed == 2);
  CHECK(max_col_diff(X, run.final_x) <= 1e-12);

  // the output of an epoch run is the last epoch's average
  CHECK(max_col_diff(X, run.final_avg) <= 1e-12);
  REQUIRE(run.snapshots.size() == 3);
  for (int i = 0; i < m; ++i) {
    // round 5 starts epoch two, so its iterates are the epoch-one averages
    CHECK((run.snapshots[1].x[static_cast<std::size_t>(i)] -
           run.snapshots[0].avg[static_cast<std::size_t>(i)])
              .norm() <= 1e-15);
    // the t = 12 snapshot average covers all eight epoch-two rounds, which is
    // exactly the warm-start point reported as the final output
    CHECK((run.snapshots[2].avg[static_cast<std::size_t>(i)] -
           run.final_x[static_cast<std::size_t>(i)])
              .norm() <= 1e-15);
  }

  // step sizes are constant within an epoch
  CHECK(run.snapshots[0].eta == 1.0 / inst.sigma_F);
  CHECK(run.snapshots[1].eta == 0.5 / inst.sigma_F);
  CHECK(run.snapshots[2].eta == 0.5 / inst.sigma_F);

  // budget accounting: only whole epochs execute
  OracleBank bank2(inst, 33);
  RunOptions opts2;
  opts2.T = 100;
  const RunResult run2 = run_epoch_dsmd(euclid, box, sched, bank2, inst.sigma_F, opts2);
  CHECK(run2.rounds == 60);
  CHECK(run2.epochs_completed == 4);
}

TEST_CASE("euclidean baseline is the identical computation") {
  const auto euclid = MirrorGeometry::euclidean();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto box = ConstraintSet::box_uniform(5, -1, 1);
    const auto inst = make_instance(6, box, euclid, 0.4, seed);
    const auto sched = make_ring_schedule(6, 0.6, 2, seed + 100);
    RunOptions opts;
    opts.T = 50;
    opts.checkpoints = {10, 50};
    OracleBank bank_a(inst, seed + 200), bank_b(inst, seed + 200);
    const RunResult a = run_dsmd(euclid, box, sched, bank_a, inst.sigma_F, opts);
    const RunResult b = run_dsps(box, sched, bank_b, inst.sigma_F, opts);
    REQUIRE(a.final_x.size() == b.final_x.size());
    for (std::size_t i = 0; i < a.final_x.size(); ++i) {
      CHECK((a.final_x[i] - b.final_x[i]).norm() == 0.0);
      CHECK((a.final_avg[i] - b.final_avg[i]).norm() == 0.0);
    }
    for (std::size_t s = 0; s < a.snapshots.size(); ++s) {
      for (std::size_t i = 0; i < a.final_x.size(); ++i) {
        CHECK((a.snapshots[s].x[i] - b.snapshots[s].x[i]).norm() == 0.0);
      }
    }
    CHECK(a.max_step_excess == b.max_step_excess);
  }
}

TEST_CASE("one noiseless agent lands on the optimum after one step") {
  // eta_1 = 1/(2a) makes x_2 = x_1 - (x_1 - b) = b; every later step stays put,
  // so the running average error is ||x_1 - b||^2 / T^2.
  const auto euclid = MirrorGeometry::euclidean();
  const auto box = ConstraintSet::box_uniform(2, -1, 1);
  const Point b = pt2(0.5, -0.25);
  const ProblemInstance inst{{{1.0, b}}, box, 0.0, 2.0, 3.0};
  const auto sched = make_ring_schedule(1, 0.5, 2, 7);
  OracleBank bank(inst, 8);
  RunOptions opts;
  opts.T = 2000;
  const RunResult run = run_dsmd(euclid, box, sched, bank, inst.sigma_F, opts);
  REQUIRE(!run.aborted);
  CHECK((run.final_x[0] - b).norm() == 0.0);
  const double expected_err = b.squaredNorm() / (2000.0 * 2000.0);
  CHECK((run.final_avg[0] - b).squaredNorm() ==
        doctest::Approx(expected_err).epsilon(1e-9));
}

TEST_CASE("consensus at the shared optimum is a fixed point") {
  const auto euclid = MirrorGeometry::euclidean();
  const auto box = ConstraintSet::box_uniform(3, -1, 1);
  Point p(3);
  p << 0.3, -0.7, 0.1;
  std::vector<QuadraticObjective> objs;
  for (double a : {0.6, 1.0, 1.4, 0.8}) objs.push_back({a, p});
  const ProblemInstance inst{objs, box, 0.0, 1.2, 5.0};
  const auto sched = make_ring_schedule(4, 0.5, 2, 17);
  OracleBank bank(inst, 18);
  RunOptions opts;
  opts.T = 50;
  opts.initial_points.assign(4, p);
  const RunResult run = run_dsmd(euclid, box, sched, bank, inst.sigma_F, opts);
  REQUIRE(!run.aborted);
  for (const Point& x : run.final_x) CHECK((x - p).norm() <= 1e-12);
  for (const Point& x : run.final_avg) CHECK((x - p).norm() <= 1e-12);
}

TEST_CASE("pure mixing contracts disagreement at the geometric rate") {
  const auto euclid = MirrorGeometry::euclidean();
  const auto box = ConstraintSet::box_uniform(3, -1, 1);
  const auto sched = make_ring_schedule(6, 0.5, 2, 21);
  const MixingConstants mc = mixing_constants(sched.xi, sched.m, sched.B);
  ZeroGradient zero(3);
  RunOptions opts;
  opts.T = 40;
  opts.checkpoints = {1, 2, 5, 9, 17, 33};
  opts.random_init = true;
  opts.init_seed = 4;
  const RunResult run = run_dsmd(euclid, box, sched, zero, 1.0, opts);
  REQUIRE(!run.aborted);
  REQUIRE(run.snapshots.size() == 6);

  auto max_pair_gap = [](const std::vector<Point>& xs) {
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = i + 1; j < xs.size(); ++j) {
        worst = std::max(worst, (xs[i] - xs[j]).norm());
      }
    }
    return worst;
  };

  for (const CheckpointSnapshot& snap : run.snapshots) {
    if (snap.t == 1) continue;
    // the iterates at round t have been mixed t - 1 times
    const double bound = 2.0 * mc.alpha *
                         std::pow(mc.beta, static_cast<double>(snap.t - 1)) *
                         run.initial_norm_sum;
    CHECK(max_pair_gap(snap.x) <= bound);
  }
  CHECK(max_pair_gap(run.snapshots[5].x) < max_pair_gap(run.snapshots[0].x));

  // doubly stochastic mixing with zero gradients preserves the network mean
  Point mean_first = Point::Zero(3), mean_last = Point::Zero(3);
  for (int i = 0; i < 6; ++i) {
    mean_first += run.snapshots[0].x[static_cast<std::size_t>(i)];
    mean_last += run.snapshots[5].x[static_cast<std::size_t>(i)];
  }
  CHECK((mean_first - mean_last).norm() / 6.0 <= 1e-12);
}

TEST_CASE("post-step displacement respects the step-size bound") {
  const auto euclid = MirrorGeometry::euclidean();
  const auto entropy = MirrorGeometry::negative_entropy();
  const auto box = ConstraintSet::box_uniform(4, -1, 1);
  const auto simplex = ConstraintSet::simplex(5);
  {
    const auto inst = make_instance(5, box, euclid, 0.3, 41);
    const auto sched = make_ring_schedule(5, 0.5, 2, 42);
    OracleBank bank(inst, 43);
    RunOptions opts;
    opts.T = 200;
    const RunResult run = run_dsmd(euclid, box, sched, bank, inst.sigma_F, opts);
    REQUIRE(!run.aborted);
    CHECK(run.max_step_excess <= 1e-10);
  }
  {
    const auto inst = make_instance(5, simplex, entropy, 0.3, 44);
    const auto sched = make_ring_schedule(5, 0.5, 2, 45);
    OracleBank bank(inst, 46);
    RunOptions opts;
    opts.T = 200;
    const RunResult run = run_dsmd(entropy, simplex, sched, bank, inst.sigma_F, opts);
    REQUIRE(!run.aborted);
    CHECK(run.max_step_excess <= 1e-10);
  }
}

TEST_CASE("runs abort cleanly on bad gradients instead of spreading NaNs") {
  const auto euclid = MirrorGeometry::euclidean();
  const auto box = ConstraintSet::box_uniform(2, -1, 1);
  const auto sched = make_ring_schedule(3, 0.5, 2, 51);
  PoisonedGradient poisoned(2, 7);  // rounds 1-2 complete, round 3 fails
  RunOptions opts;
  opts.T = 10;
  const RunResult run = run_dsmd(euclid, box, sched, poisoned, 1.0, opts);
  CHECK(run.aborted);
  CHECK(run.abort_round == 3);
  CHECK(run.rounds == 2);
  CHECK(run.abort_reason.find("gradient") != std::string::npos);
}

TEST_CASE("run option validation") {
  const auto euclid = MirrorGeometry::euclidean();
  const auto box = ConstraintSet::box_uniform(2, -1, 1);
  const auto sched = make_ring_schedule(3, 0.5, 2, 61);
  ZeroGradient zero(2);
  RunOptions opts;
  opts.T = 0;
  CHECK_THROWS_AS(run_dsmd(euclid, box, sched, zero, 1.0, opts), std::invalid_argument);
  opts.T = 10;
  opts.checkpoints = {11};
  CHECK_THROWS_AS(run_dsmd(euclid, box, sched, zero, 1.0, opts), std::invalid_argument);
  opts.checkpoints = {0};
  CHECK_THROWS_AS(run_dsmd(euclid, box, sched, zero, 1.0, opts), std::invalid_argument);
  opts.checkpoints.clear();
  opts.initial_points.assign(2, pt2(0, 0));  // wrong agent count
  CHECK_THROWS_AS(run_dsmd(euclid, box, sched, zero, 1.0, opts), std::invalid_argument);
  opts.initial_points.assign(3, pt2(2, 0));  // outside the box
  CHECK_THROWS_AS(run_dsmd(euclid, box, sched, zero, 1.0, opts), std::invalid_argument);
  opts.initial_points.clear();
  CHECK_THROWS_AS(run_dsmd(euclid, box, sched, zero, 0.0, opts), std::invalid_argument);
  CHECK_THROWS_AS(run_dsmd(MirrorGeometry::negative_entropy(), box, sched, zero, 1.0, opts),
                  std::invalid_argument);
}

TEST_CASE("identical seeds reproduce runs exactly") {
  const auto euclid = MirrorGeometry::euclidean();
  const auto box = ConstraintSet::box_uniform(3, -1, 1);
  const auto inst = make_instance(4, box, euclid, 0.5, 71);
  const auto sched = make_ring_schedule(4, 0.5, 2, 72);
  RunOptions opts;
  opts.T = 60;
  opts.random_init = true;
  opts.init_seed = 9;
  OracleBank bank_a(inst, 73), bank_b(inst, 73), bank_c(inst, 74);
  const RunResult a = run_dsmd(euclid, box, sched, bank_a, inst.sigma_F, opts);
  const RunResult b = run_dsmd(euclid, box, sched, bank_b, inst.sigma_F, opts);
  const RunResult c = run_dsmd(euclid, box, sched, bank_c, inst.sigma_F, opts);
  CHECK(a.initial_norm_sum == b.initial_norm_sum);
  double diff_same = 0.0, diff_other = 0.0;
  for (std::size_t i = 0; i < a.final_x.size(); ++i) {
    diff_same += (a.final_x[i] - b.final_x[i]).norm();
    diff_other += (a.final_x[i] - c.final_x[i]).norm();
  }
  CHECK(diff_same == 0.0);
  CHECK(diff_other > 0.0);
}

TEST_CASE("tracked disagreement equals a recount from full snapshots") {
  const auto euclid = MirrorGeometry::euclidean();
  const auto box = ConstraintSet::box_uniform(3, -1, 1);
  const auto inst = make_instance(4, box, euclid, 0.3, 81);
  const auto sched = make_ring_schedule(4, 0.5, 2, 82);
  RunOptions opts;
  opts.T = 10;
  opts.track_disagreement = true;
  opts.random_init = true;
  opts.init_seed = 5;
  for (long t = 1; t <= opts.T; ++t) opts.checkpoints.push_back(t);
  OracleBank bank(inst, 83);
  const RunResult run = run_dsmd(euclid, box, sched, bank, inst.sigma_F, opts);
  REQUIRE(!run.aborted);
  REQUIRE(run.cumulative_disagreement.size() == 4);
  REQUIRE(run.snapshots.size() == 10);
  for (int j = 0; j < 4; ++j) {
    double total = 0.0;
    for (const CheckpointSnapshot& snap : run.snapshots) {
      for (int i = 0; i < 4; ++i) {
        if (i != j) {
          total += (snap.x[static_cast<std::size_t>(i)] -
                    snap.x[static_cast<std::size_t>(j)])
                       .norm();
        }
      }
    }
    CHECK(run.cumulative_disagreement[static_cast<std::size_t>(j)] ==
          doctest::Approx(total).epsilon(1e-12));
  }
}
