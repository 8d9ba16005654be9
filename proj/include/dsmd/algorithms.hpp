#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dsmd/geometry.hpp"
#include "dsmd/network.hpp"
#include "dsmd/problem.hpp"

namespace dsmd {

// Where the per-agent gradient estimates come from. The simulator only sees
// this interface, so tests can substitute exact or degenerate oracles.
class GradientSource {
 public:
  virtual ~GradientSource() = default;
  virtual Point gradient(int agent, const Point& x) = 0;
};

// One stochastic oracle per agent, each on its own noise stream.
class OracleBank : public GradientSource {
 public:
  OracleBank(const ProblemInstance& instance, std::uint64_t seed);
  Point gradient(int agent, const Point& x) override;

 private:
  std::vector<StochasticOracle> oracles_;
};

// Exact zero gradient; reduces the algorithms to pure consensus mixing.
class ZeroGradient : public GradientSource {
 public:
  explicit ZeroGradient(int dim) : zero_(Point::Zero(dim)) {}
  Point gradient(int, const Point&) override { return zero_; }

 private:
  Point zero_;
};

// State of the network at a recorded round t: iterates x_{i,t}, running
// averages over the averaging span in force, and the step size used at t.
struct CheckpointSnapshot {
  long t = 0;
  double eta = 0.0;
  std::vector<Point> x;
  std::vector<Point> avg;
};

struct RunOptions {
  long T = 0;                    // round budget
  std::vector<long> checkpoints; // rounds to snapshot, values in [1, T]
  std::vector<Point> initial_points;  // explicit starts; empty = default
  bool random_init = false;      // random feasible starts instead of argmin Phi
  std::uint64_t init_seed = 0;
  // Accumulate sum_t sum_i ||x_{i,t} - x_{j,t}|| per reference node j.
  // Costs O(m^2 d) per round, so off unless a consensus diagnostic needs it.
  bool track_disagreement = false;
};

struct RunResult {
  std::vector<Point> final_x;    // the algorithm's output points
  std::vector<Point> final_avg;  // running averages over the last span
  long rounds = 0;               // rounds actually executed
  int epochs_completed = 0;      // epoch runs only
  std::vector<CheckpointSnapshot> snapshots;
  double sum_eta = 0.0;              // sum of step sizes over executed rounds
  double initial_norm_sum = 0.0;     // sum_i ||x_{i,1}||
  double max_step_excess = -std::numeric_limits<double>::infinity();
  std::vector<double> cumulative_disagreement;  // per node, when tracked
  bool aborted = false;
  long abort_round = -1;
  std::string abort_reason;
};

// One round per t = 1..T: query gradients at x_{i,t}, take the mirror step
// with eta_t = 1/(sigma_F t), then average neighbors' post-step points with
// A(t). Running averages include x_{i,1}. Non-finite or infeasible iterates
// abort the run with the offending round recorded.
RunResult run_dsmd(const MirrorGeometry& geom, const ConstraintSet& set,
                   const MixingSchedule& sched, GradientSource& grads,
                   double sigma_F, const RunOptions& opts);

// Epoch variant: epoch k runs T_k rounds at constant eta_k, then warm-starts
// every agent from its epoch average; horizons double and step sizes halve.
// Default starts are argmin_X Phi. The mixing schedule's round counter runs
// through epoch boundaries, and rounds beyond the last whole epoch are not
// executed.
RunResult run_epoch_dsmd(const MirrorGeometry& geom, const ConstraintSet& set,
                         const MixingSchedule& sched, GradientSource& grads,
                         double sigma_F, const RunOptions& opts);

// Distributed projected subgradient baseline: run_dsmd in the Euclidean
// geometry, where the Bregman projection is the Euclidean one.
RunResult run_dsps(const ConstraintSet& set, const MixingSchedule& sched,
                   GradientSource& grads, double sigma_F, const RunOptions& opts);

// ── Epoch bookkeeping ───────────────────────────────────────────────

struct Epoch {
  long rounds = 0;
  double eta = 0.0;
};

struct EpochSchedule {
  std::vector<Epoch> epochs;  // (T_k, eta_k), k = 1..k_dagger
  int k_dagger = 0;
  long total_rounds = 0;      // sum of T_k = 4 (2^k_dagger - 1)
};

// T_1 = 4, eta_1 = 1/sigma_F, T_{k+1} = 2 T_k, eta_{k+1} = eta_k / 2, with as
// many whole epochs as fit the budget: k_dagger = floor(log2(T/4 + 1)).
EpochSchedule epoch_schedule(long T, double sigma_F);

// ── Convergence bound evaluation ────────────────────────────────────

struct TheoremConstants {
  // inputs
  double G = 0.0;
  double sigma_F = 0.0;
  double sigma_phi = 1.0;
  double alpha = 1.0;
  double beta = 0.0;
  int m = 1;
  double R_X = 0.0;
  double R_PhiX = 0.0;
  double initial_norm_sum = 0.0;  // sum_i E ||x_{i,1}||
  // derived
  double c = 0.0;        // bounds E||xhat_{j,T} - x*||^2 <= c ln(T)/T + c'/T
  double c_prime = 0.0;
  double c1 = 0.0;       // epoch-run constants feeding c_hat
  double c2 = 0.0;
  double c_hat = 0.0;    // bounds sum_i E||x^{k+1}_{i,1} - x*||^2 <= 64 c_hat / T
};

TheoremConstants compute_constants(double G, double sigma_F, double sigma_phi,
                                   const MixingConstants& mix, int m, double R_X,
                                   double R_PhiX, double initial_norm_sum);

// c ln(T)/T + c'/T, valid for T >= 3.
double theorem1_bound(const TheoremConstants& k, long T);

// 64 c_hat / T, valid for T >= 4.
double theorem2_bound(const TheoremConstants& k, long T);

// m (2ab/(1-b) + 1) sum_i E||x_{i,1}|| + (2ab m^2 G/((1-b) sigma_phi)) sum_t eta_t,
// the bound on the cumulative disagreement sum_t sum_i E||x_{i,t} - x_{j,t}||.
double lemma1_bound(const TheoremConstants& k, double sum_eta);

// ||z - x|| - (eta/sigma_phi) ||g||: positive values violate the one-step
// displacement bound of the mirror update.
double step_excess(const Point& x, const Point& g, const Point& z, double eta,
                   double sigma_phi);

}  // namespace dsmd
