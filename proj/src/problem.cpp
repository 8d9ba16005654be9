#include "dsmd/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dsmd {

namespace {

// Stream labels for deriving independent substreams from one seed.
constexpr std::uint64_t kDataTag = 0x64617461;  // "data"
constexpr std::uint64_t kCertTag = 0x63657274;  // "cert"

}  // namespace

double objective_value(const QuadraticObjective& obj, const Point& x) {
  return obj.a * (x - obj.b).squaredNorm();
}

Point subgradient(const QuadraticObjective& obj, const Point& x) {
  if (x.size() != obj.b.size()) {
    throw std::invalid_argument("subgradient: point dimension does not match data");
  }
  return 2.0 * obj.a * (x - obj.b);
}

StochasticOracle::StochasticOracle(QuadraticObjective objective, double noise_std,
                                   std::uint64_t seed)
    : objective_(std::move(objective)), noise_std_(noise_std), seed_(seed) {
  if (noise_std < 0.0) {
    throw std::invalid_argument("StochasticOracle: noise level must be >= 0");
  }
}

Point StochasticOracle::noisy_subgradient(const Point& x) {
  Point g = subgradient(objective_, x);
  ++queries_;
  if (noise_std_ > 0.0) {
    Rng rng(mix64(seed_, queries_));
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) += noise_std_ * rng.normal();
  }
  return g;
}

double total_objective(const ProblemInstance& instance, const Point& x) {
  double v = 0.0;
  for (const auto& obj : instance.objectives) v += objective_value(obj, x);
  return v;
}

Point global_optimum(const ProblemInstance& instance) {
  if (instance.objectives.empty()) {
    throw std::invalid_argument("global_optimum: no objectives");
  }
  const Eigen::Index d = instance.objectives.front().b.size();
  Point weighted = Point::Zero(d);
  double total_a = 0.0;
  for (const auto& obj : instance.objectives) {
    weighted += obj.a * obj.b;
    total_a += obj.a;
  }
  const Point mean = weighted / total_a;
  return instance.set.kind() == SetKind::Box
             ? project_box(mean, instance.set.lower(), instance.set.upper())
             : project_simplex(mean);
}

double certify_sigma_F(const std::vector<QuadraticObjective>& objectives,
                       const ConstraintSet& set, const MirrorGeometry& geom,
                       int num_pairs, std::uint64_t seed) {
  if (objectives.empty()) {
    throw std::invalid_argument("certify_sigma_F: no objectives");
  }
  double min_a = std::numeric_limits<double>::infinity();
  for (const auto& obj : objectives) {
    if (!(obj.a > 0.0)) {
      throw std::invalid_argument("certify_sigma_F: weights must be positive");
    }
    min_a = std::min(min_a, obj.a);
  }
  if (geom.kind == GeometryKind::Euclidean) return 2.0 * min_a;

  // Quadratics give F_i(x) - F_i(y) - <g_i(y), x-y> = a_i ||x-y||^2 exactly,
  // so the binding ratio is min_i a_i times the empirical infimum of
  // ||x-y||^2 / KL(x||y) over feasible pairs.
  if (num_pairs < 1) throw std::invalid_argument("certify_sigma_F: need sample pairs");
  Rng rng(mix64(seed, kCertTag));
  double min_ratio = std::numeric_limits<double>::infinity();
  for (int k = 0; k < num_pairs; ++k) {
    const Point x = sample_point(set, rng);
    const Point y = sample_point(set, rng);
    const double div = bregman_divergence(geom, x, y);
    if (div <= 1e-15) continue;  // coincident draw carries no information
    min_ratio = std::min(min_ratio, (x - y).squaredNorm() / div);
  }
  if (!std::isfinite(min_ratio)) {
    throw std::runtime_error("certify_sigma_F: no usable sample pairs");
  }
  const double certificate = 0.9 * min_a * min_ratio;
  if (certificate < 1e-8) {
    throw std::runtime_error(
        "certify_sigma_F: certificate degenerated; objective is not strongly "
        "convex w.r.t. this geometry");
  }
  return certificate;
}

double certify_G(const std::vector<QuadraticObjective>& objectives,
                 const ConstraintSet& set, double noise_std) {
  if (objectives.empty()) throw std::invalid_argument("certify_G: no objectives");
  if (noise_std < 0.0) throw std::invalid_argument("certify_G: noise level must be >= 0");
  const int d = set.dim();
  double max_grad_sq = 0.0;
  for (const auto& obj : objectives) {
    double far_sq = 0.0;  // sup over X of ||x - b||^2
    if (set.kind() == SetKind::Box) {
      for (int c = 0; c < d; ++c) {
        const double reach = std::max(std::abs(set.lower()(c) - obj.b(c)),
                                      std::abs(set.upper()(c) - obj.b(c)));
        far_sq += reach * reach;
      }
    } else {
      for (int c = 0; c < d; ++c) {
        Point vertex = Point::Zero(d);
        vertex(c) = 1.0;
        far_sq = std::max(far_sq, (vertex - obj.b).squaredNorm());
      }
    }
    max_grad_sq = std::max(max_grad_sq, 4.0 * obj.a * obj.a * far_sq);
  }
  const double g_sq = max_grad_sq + static_cast<double>(d) * noise_std * noise_std;
  return std::max(std::sqrt(g_sq), 1e-12);
}

ProblemInstance make_instance(int m, const ConstraintSet& set, const MirrorGeometry& geom,
                              double noise_std, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("make_instance: need at least one agent");
  check_pairing(geom, set);
  Rng rng(mix64(seed, kDataTag));
  std::vector<QuadraticObjective> objectives;
  objectives.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    QuadraticObjective obj;
    obj.a = rng.uniform(0.5, 1.5);
    obj.b = sample_point(set, rng);
    objectives.push_back(std::move(obj));
  }
  ProblemInstance instance{std::move(objectives), set, noise_std, 0.0, 0.0};
  instance.sigma_F = certify_sigma_F(instance.objectives, set, geom, 10000, seed);
  instance.G = certify_G(instance.objectives, set, noise_std);
  return instance;
}

}  // namespace dsmd
