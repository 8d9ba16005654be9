#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dsmd {

using Matrix = Eigen::MatrixXd;
using Edge = std::pair<int, int>;  // undirected, endpoints in [0, m)

enum class Topology { Ring, Complete, Custom };

// Generator of per-round doubly stochastic mixing matrices A(t). Each round
// activates a random subset of the base edges; Metropolis weights on the
// active subgraph keep every matrix symmetric and doubly stochastic. Every
// B-th round activates the full base topology so consecutive B-windows are
// strongly connected by construction.
struct MixingSchedule {
  int m = 1;
  Topology topology = Topology::Ring;
  std::vector<Edge> base_edges;
  double activation = 1.0;  // fraction of base edges active per round
  int B = 1;                // connectivity window
  double xi = 1.0;          // lower bound on diagonal and active-edge entries
  std::uint64_t seed = 0;
  bool force_full_round = true;  // disable only to build negative controls
};

MixingSchedule make_ring_schedule(int m, double activation, int B, std::uint64_t seed);
MixingSchedule make_complete_schedule(int m, double activation, int B, std::uint64_t seed);
MixingSchedule make_custom_schedule(int m, std::vector<Edge> edges, double activation,
                                    int B, std::uint64_t seed);

// Symmetric Metropolis weights on an explicit active edge set:
// [A]_ij = 1/(1 + max(deg_i, deg_j)) on active edges, diagonal absorbs the
// remainder. Doubly stochastic for any undirected activation pattern.
Matrix metropolis_matrix(int m, const std::vector<Edge>& active_edges);

// A(t) for round t >= 1, deterministic in (schedule.seed, t). Activates
// ceil(activation * |E|) base edges chosen uniformly at random; every B-th
// round activates all of them.
Matrix sample_matrix(const MixingSchedule& sched, long t);

// Active base-edge subset used by sample_matrix at round t.
std::vector<Edge> active_edges(const MixingSchedule& sched, long t);

// A(t, l) = A(t) A(t-1) ... A(l), t >= l >= 1.
Matrix transition_product(const MixingSchedule& sched, long t, long l);

// Geometric mixing constants of the transition products:
// |[A(t,l)]_ij - 1/m| <= alpha * beta^(t-l+1).
struct MixingConstants {
  double alpha = 1.0;  // > 1
  double beta = 0.0;   // in (0,1)
};

MixingConstants mixing_constants(double xi, int m, int B);

struct Assumption1Report {
  bool ok = false;
  double min_diagonal = 0.0;
  double min_positive_entry = 0.0;
  double max_stochasticity_gap = 0.0;  // worst row/column sum deviation from 1
  bool connectivity_ok = false;
  long first_bad_window = -1;  // start round of the first disconnected B-window
};

// Samples rounds 1..horizon and checks nonnegativity, double stochasticity,
// the xi lower bounds, and strong connectivity of every B-window union graph.
Assumption1Report verify_assumption1(const MixingSchedule& sched, long horizon);

// Max over random windows (t, l) of |[A(t,l)]_ij - 1/m| - alpha*beta^(t-l+1),
// maximized over i, j. Nonpositive when the geometric mixing bound holds.
double mixing_bound_check(const MixingSchedule& sched, int num_windows, int max_len,
                          std::uint64_t seed);

}  // namespace dsmd
