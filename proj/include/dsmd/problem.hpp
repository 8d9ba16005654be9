#pragma once

#include <cstdint>
#include <vector>

#include "dsmd/geometry.hpp"
#include "dsmd/rng.hpp"

namespace dsmd {

// Local objective F_i(x) = a ||x - b||^2 with subgradient 2a(x - b);
// 2a-strongly convex in the Euclidean sense.
struct QuadraticObjective {
  double a = 1.0;
  Point b;
};

double objective_value(const QuadraticObjective& obj, const Point& x);
Point subgradient(const QuadraticObjective& obj, const Point& x);

// Unbiased gradient estimates g(x) + N(0, noise_std^2 I). Each query draws
// from a stream keyed by (seed, query index), so a replay of the same oracle
// reproduces the same noise sequence.
class StochasticOracle {
 public:
  StochasticOracle(QuadraticObjective objective, double noise_std, std::uint64_t seed);

  Point noisy_subgradient(const Point& x);

  const QuadraticObjective& objective() const { return objective_; }
  double noise_std() const { return noise_std_; }
  std::uint64_t queries() const { return queries_; }

 private:
  QuadraticObjective objective_;
  double noise_std_;
  std::uint64_t seed_;
  std::uint64_t queries_ = 0;
};

// A full m-agent problem: objectives, feasible set, and the certified
// constants the step rules and bounds depend on.
struct ProblemInstance {
  std::vector<QuadraticObjective> objectives;
  ConstraintSet set;
  double noise_std = 0.0;
  double sigma_F = 0.0;  // strong convexity of each F_i w.r.t. the geometry
  double G = 0.0;        // bound on E||noisy subgradient||^2, squared root
};

double total_objective(const ProblemInstance& instance, const Point& x);

// x* = argmin_X sum_i F_i. The sum is (sum a_i)||x - xbar||^2 plus a constant
// with xbar the weighted mean of the b_i, so x* is the Euclidean projection
// of xbar onto X, in closed form.
Point global_optimum(const ProblemInstance& instance);

// Strong convexity modulus of every F_i w.r.t. the geometry's Bregman
// divergence. Euclidean: exactly 2 min_i a_i. NegativeEntropy: numeric
// certificate, 0.9 times the empirical infimum of
// [F_i(x) - F_i(y) - <g_i(y), x-y>] / D_Phi(x||y) over random simplex pairs.
// Throws when the certificate degenerates (below 1e-8).
double certify_sigma_F(const std::vector<QuadraticObjective>& objectives,
                       const ConstraintSet& set, const MirrorGeometry& geom,
                       int num_pairs, std::uint64_t seed);

// G with G^2 = max_i sup_X ||2 a_i (x - b_i)||^2 + d * noise_std^2; the sup is
// exact (farthest box corner, or farthest simplex vertex).
double certify_G(const std::vector<QuadraticObjective>& objectives,
                 const ConstraintSet& set, double noise_std);

// Seeded instance of the quadratic family: a_i uniform on [0.5, 1.5], b_i
// uniform on X, constants certified against the given geometry.
ProblemInstance make_instance(int m, const ConstraintSet& set, const MirrorGeometry& geom,
                              double noise_std, std::uint64_t seed);

}  // namespace dsmd
