#include "dsmd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsmd {

bool is_finite(const Point& x) { return x.allFinite(); }

namespace {

void require_same_dim(const Point& a, const Point& b, const char* where) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
}

void require_nonnegative(const Point& x, const char* where) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) < 0.0) {
      throw std::invalid_argument(std::string(where) +
                                  ": negative coordinate in entropic geometry");
    }
  }
}

}  // namespace

// ── Geometry and set construction ───────────────────────────────────

MirrorGeometry MirrorGeometry::euclidean() {
  MirrorGeometry g;
  g.kind = GeometryKind::Euclidean;
  g.sigma_phi = 1.0;
  g.entropy_floor = 0.0;
  return g;
}

MirrorGeometry MirrorGeometry::negative_entropy(double entropy_floor) {
  if (!(entropy_floor > 0.0) || entropy_floor > 1e-9) {
    throw std::invalid_argument(
        "negative_entropy: entropy_floor must lie in (0, 1e-9]");
  }
  MirrorGeometry g;
  g.kind = GeometryKind::NegativeEntropy;
  // 1-strongly convex w.r.t. ||.||_1 on the simplex (Pinsker), hence also
  // w.r.t. ||.||_2 since ||.||_1 >= ||.||_2.
  g.sigma_phi = 1.0;
  g.entropy_floor = entropy_floor;
  return g;
}

ConstraintSet ConstraintSet::simplex(int dim) {
  if (dim < 1) throw std::invalid_argument("simplex: dimension must be >= 1");
  return ConstraintSet(SetKind::Simplex, dim, Point(), Point());
}

ConstraintSet ConstraintSet::box(Point lower, Point upper) {
  if (lower.size() != upper.size() || lower.size() < 1) {
    throw std::invalid_argument("box: lower/upper bound sizes disagree");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower(i) < upper(i))) {
      throw std::invalid_argument("box: lower bound must be strictly below upper "
                                  "bound in every coordinate");
    }
  }
  const int dim = static_cast<int>(lower.size());
  return ConstraintSet(SetKind::Box, dim, std::move(lower), std::move(upper));
}

ConstraintSet ConstraintSet::box_uniform(int dim, double lower, double upper) {
  if (dim < 1) throw std::invalid_argument("box_uniform: dimension must be >= 1");
  return box(Point::Constant(dim, lower), Point::Constant(dim, upper));
}

bool ConstraintSet::contains(const Point& x, double tol) const {
  if (x.size() != dim_) return false;
  if (!is_finite(x)) return false;
  if (kind_ == SetKind::Box) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x(i) < lower_(i) - tol || x(i) > upper_(i) + tol) return false;
    }
    return true;
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) < -tol) return false;
  }
  return std::abs(x.sum() - 1.0) <= tol;
}

void check_pairing(const MirrorGeometry& geom, const ConstraintSet& set) {
  if (geom.kind == GeometryKind::NegativeEntropy && set.kind() == SetKind::Box) {
    throw std::invalid_argument(
        "check_pairing: negative entropy is only defined on the simplex; "
        "pair the box constraint with the Euclidean geometry");
  }
}

// ── Mirror map primitives ───────────────────────────────────────────

Point apply_entropy_floor(const Point& x, double floor) {
  Point z = x.cwiseMax(floor);
  z /= z.sum();
  return z;
}

double phi_value(const MirrorGeometry& geom, const Point& x) {
  if (geom.kind == GeometryKind::Euclidean) return 0.5 * x.squaredNorm();
  require_nonnegative(x, "phi_value");
  const Point z = apply_entropy_floor(x, geom.entropy_floor);
  double v = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) v += z(i) * std::log(z(i));
  return v;
}

Point phi_gradient(const MirrorGeometry& geom, const Point& x) {
  if (geom.kind == GeometryKind::Euclidean) return x;
  require_nonnegative(x, "phi_gradient");
  const Point z = apply_entropy_floor(x, geom.entropy_floor);
  return z.array().log() + 1.0;
}

Point phi_gradient_inverse(const MirrorGeometry& geom, const Point& dual) {
  if (geom.kind == GeometryKind::Euclidean) return dual;
  return (dual.array() - 1.0).exp();
}

double bregman_divergence(const MirrorGeometry& geom, const Point& x, const Point& y) {
  require_same_dim(x, y, "bregman_divergence");
  if (geom.kind == GeometryKind::Euclidean) {
    return 0.5 * (x - y).squaredNorm();
  }
  require_nonnegative(x, "bregman_divergence");
  require_nonnegative(y, "bregman_divergence");
  const Point xf = apply_entropy_floor(x, geom.entropy_floor);
  const Point yf = apply_entropy_floor(y, geom.entropy_floor);
  // Phi(x) - Phi(y) - <grad Phi(y), x - y>; on the simplex this is KL(x || y).
  const Point gy = yf.array().log() + 1.0;
  return phi_value(geom, xf) - phi_value(geom, yf) - gy.dot(xf - yf);
}

// ── Projections ─────────────────────────────────────────────────────

Point project_box(const Point& y, const Point& lower, const Point& upper) {
  require_same_dim(y, lower, "project_box");
  require_same_dim(y, upper, "project_box");
  return y.cwiseMax(lower).cwiseMin(upper);
}

Point project_simplex(const Point& y) {
  const Eigen::Index d = y.size();
  if (d < 1) throw std::invalid_argument("project_simplex: empty input");
  // Sort-and-threshold: find the largest support size rho such that the
  // shifted coordinates u_j - tau stay positive, then clamp at zero.
  std::vector<double> u(y.data(), y.data() + d);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  int rho = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    cumsum += u[j];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) {
      rho = static_cast<int>(j + 1);
      tau = candidate;
    }
  }
  if (rho == 0) {
    throw std::runtime_error("project_simplex: no positive support (non-finite input?)");
  }
  return (y.array() - tau).max(0.0);
}

Point bregman_project(const MirrorGeometry& geom, const ConstraintSet& set, const Point& y) {
  check_pairing(geom, set);
  if (y.size() != set.dim()) {
    throw std::invalid_argument("bregman_project: point dimension does not match set");
  }
  if (geom.kind == GeometryKind::Euclidean) {
    return set.kind() == SetKind::Box ? project_box(y, set.lower(), set.upper())
                                      : project_simplex(y);
  }
  // KL projection of a positive vector onto the simplex is normalization.
  require_nonnegative(y, "bregman_project");
  return apply_entropy_floor(y, geom.entropy_floor);
}

// ── Mirror update ───────────────────────────────────────────────────

Point mirror_step(const MirrorGeometry& geom, const ConstraintSet& set,
                  const Point& x, const Point& g, double eta) {
  require_same_dim(x, g, "mirror_step");
  if (!(eta > 0.0)) throw std::invalid_argument("mirror_step: step size must be positive");
  const Point dual = phi_gradient(geom, x) - eta * g;
  const Point y = phi_gradient_inverse(geom, dual);
  if (!is_finite(y)) {
    throw std::runtime_error("mirror_step: dual step produced a non-finite point");
  }
  return bregman_project(geom, set, y);
}

Point entropic_step(const Point& x, const Point& g, double eta, double entropy_floor) {
  require_same_dim(x, g, "entropic_step");
  if (!(eta > 0.0)) throw std::invalid_argument("entropic_step: step size must be positive");
  require_nonnegative(x, "entropic_step");
  const Point xf = apply_entropy_floor(x, entropy_floor);
  // z_j proportional to x_j exp(-eta g_j); shift exponents by their maximum so
  // the largest term is exp(0) and nothing overflows.
  Point w = xf.array().log() - eta * g.array();
  const double shift = w.maxCoeff();
  Point z = (w.array() - shift).exp();
  const double total = z.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::runtime_error("entropic_step: update underflowed to zero mass");
  }
  return z / total;
}

// ── Diameters and extremal points ───────────────────────────────────

double phi_diameter(const MirrorGeometry& geom, const ConstraintSet& set) {
  check_pairing(geom, set);
  const int d = set.dim();
  if (geom.kind == GeometryKind::NegativeEntropy) {
    // max Phi = 0 at a vertex, min Phi = -ln d at the uniform point.
    return std::sqrt(std::log(static_cast<double>(d)));
  }
  if (set.kind() == SetKind::Simplex) {
    // max ||x||^2 = 1 at a vertex, min ||x||^2 = 1/d at the uniform point.
    return std::sqrt(0.5 * (1.0 - 1.0 / static_cast<double>(d)));
  }
  // Box: Phi is separable, so the maximum sits at the corner with the larger
  // magnitude per coordinate and the minimum at the clamped origin.
  double max_phi = 0.0;
  for (int i = 0; i < d; ++i) {
    const double m = std::max(std::abs(set.lower()(i)), std::abs(set.upper()(i)));
    max_phi += 0.5 * m * m;
  }
  const Point nearest_origin = project_box(Point::Zero(d), set.lower(), set.upper());
  return std::sqrt(max_phi - 0.5 * nearest_origin.squaredNorm());
}

double euclidean_diameter(const ConstraintSet& set) {
  if (set.kind() == SetKind::Box) return (set.upper() - set.lower()).norm();
  return std::sqrt(2.0);
}

Point phi_minimizer(const MirrorGeometry& geom, const ConstraintSet& set) {
  check_pairing(geom, set);
  const int d = set.dim();
  if (set.kind() == SetKind::Simplex) {
    return Point::Constant(d, 1.0 / static_cast<double>(d));
  }
  return project_box(Point::Zero(d), set.lower(), set.upper());
}

Point sample_point(const ConstraintSet& set, Rng& rng) {
  const int d = set.dim();
  Point x(d);
  if (set.kind() == SetKind::Box) {
    for (int i = 0; i < d; ++i) x(i) = rng.uniform(set.lower()(i), set.upper()(i));
    return x;
  }
  // Normalized exponential spacings give the uniform distribution on the simplex.
  for (int i = 0; i < d; ++i) x(i) = -std::log(1.0 - rng.uniform01());
  return x / x.sum();
}

}  // namespace dsmd
