#pragma once

#include <Eigen/Dense>

#include "dsmd/rng.hpp"

namespace dsmd {

// Decision variable: dense real vector of the ambient dimension d.
using Point = Eigen::VectorXd;

bool is_finite(const Point& x);

enum class GeometryKind { Euclidean, NegativeEntropy };
enum class SetKind { Simplex, Box };

// Distance-generating function Phi together with its strong-convexity
// modulus w.r.t. the Euclidean norm. Two setups are supported:
//   Euclidean:        Phi(x) = 0.5 ||x||^2,         sigma_phi = 1
//   NegativeEntropy:  Phi(x) = sum_i x_i ln x_i,    sigma_phi = 1 on the simplex
struct MirrorGeometry {
  GeometryKind kind = GeometryKind::Euclidean;
  double sigma_phi = 1.0;
  double entropy_floor = 0.0;  // clamp applied before logarithms

  static MirrorGeometry euclidean();
  static MirrorGeometry negative_entropy(double entropy_floor = 1e-12);
};

// Feasible set X: the unit simplex or an axis-aligned box. Convex, closed,
// bounded in both cases.
class ConstraintSet {
 public:
  static ConstraintSet simplex(int dim);
  static ConstraintSet box(Point lower, Point upper);
  static ConstraintSet box_uniform(int dim, double lower, double upper);

  SetKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Point& lower() const { return lower_; }
  const Point& upper() const { return upper_; }

  bool contains(const Point& x, double tol = 1e-9) const;

 private:
  ConstraintSet(SetKind kind, int dim, Point lower, Point upper)
      : kind_(kind), dim_(dim), lower_(std::move(lower)), upper_(std::move(upper)) {}

  SetKind kind_;
  int dim_;
  Point lower_, upper_;  // Box only
};

// Rejects pairings with no supported Bregman projection
// (NegativeEntropy x Box). Throws std::invalid_argument.
void check_pairing(const MirrorGeometry& geom, const ConstraintSet& set);

// ── Mirror map primitives ───────────────────────────────────────────

double phi_value(const MirrorGeometry& geom, const Point& x);
Point phi_gradient(const MirrorGeometry& geom, const Point& x);
Point phi_gradient_inverse(const MirrorGeometry& geom, const Point& dual);

// Clamps coordinates below `floor` and renormalizes to unit sum. Applied to
// every negative-entropy input so the dual step stays finite.
Point apply_entropy_floor(const Point& x, double floor);

// D_Phi(x || y) = Phi(x) - Phi(y) - <grad Phi(y), x - y>. Nonnegative, zero
// iff x == y. For NegativeEntropy both arguments must be coordinatewise
// nonnegative; they are floored and renormalized before evaluation.
double bregman_divergence(const MirrorGeometry& geom, const Point& x, const Point& y);

// ── Projections ─────────────────────────────────────────────────────

Point project_box(const Point& y, const Point& lower, const Point& upper);

// Exact Euclidean projection onto the unit simplex, O(d log d)
// sort-and-threshold.
Point project_simplex(const Point& y);

// argmin_{x in X} D_Phi(x || y). Euclidean/Box: clamp. Euclidean/Simplex:
// sort-and-threshold. NegativeEntropy/Simplex: normalization of y.
Point bregman_project(const MirrorGeometry& geom, const ConstraintSet& set, const Point& y);

// ── Mirror update ───────────────────────────────────────────────────

// Dual gradient step followed by Bregman projection:
//   grad Phi(y) = grad Phi(x) - eta g,   z = argmin_{w in X} D_Phi(w || y).
Point mirror_step(const MirrorGeometry& geom, const ConstraintSet& set,
                  const Point& x, const Point& g, double eta);

// Closed form of the entropic update on the simplex:
//   z_j = x_j exp(-eta g_j) / sum_l x_l exp(-eta g_l)
// with the exponents shifted by their maximum before exponentiation.
Point entropic_step(const Point& x, const Point& g, double eta,
                    double entropy_floor = 1e-12);

// ── Diameters and extremal points ───────────────────────────────────

// R_{Phi,X} = (max_X Phi - min_X Phi)^{1/2}, in closed form.
double phi_diameter(const MirrorGeometry& geom, const ConstraintSet& set);

// R_X = max_{x,y in X} ||x - y||_2, in closed form.
double euclidean_diameter(const ConstraintSet& set);

// argmin_{x in X} Phi(x): clamp of the origin for Euclidean/Box, the uniform
// point for either geometry on the simplex.
Point phi_minimizer(const MirrorGeometry& geom, const ConstraintSet& set);

// Uniform sample from X: per-coordinate uniform for Box, normalized
// exponentials for Simplex.
Point sample_point(const ConstraintSet& set, Rng& rng);

}  // namespace dsmd
