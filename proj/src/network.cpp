#include "dsmd/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "dsmd/rng.hpp"

namespace dsmd {

namespace {

void validate_schedule_params(int m, double activation, int B) {
  if (m < 1) throw std::invalid_argument("mixing schedule: node count must be >= 1");
  if (!(activation > 0.0) || activation > 1.0) {
    throw std::invalid_argument("mixing schedule: activation must lie in (0, 1]");
  }
  if (B < 1) throw std::invalid_argument("mixing schedule: window B must be >= 1");
}

int max_degree(int m, const std::vector<Edge>& edges) {
  std::vector<int> deg(static_cast<size_t>(m), 0);
  for (const auto& [i, j] : edges) {
    ++deg[static_cast<size_t>(i)];
    ++deg[static_cast<size_t>(j)];
  }
  return edges.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
}

MixingSchedule finish_schedule(int m, Topology topology, std::vector<Edge> edges,
                               double activation, int B, std::uint64_t seed) {
  validate_schedule_params(m, activation, B);
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= m || j >= m || i == j) {
      throw std::invalid_argument("mixing schedule: edge endpoints out of range");
    }
  }
  if (m > 1 && edges.empty()) {
    throw std::invalid_argument("mixing schedule: no edges on a multi-node network");
  }
  MixingSchedule s;
  s.m = m;
  s.topology = topology;
  s.base_edges = std::move(edges);
  s.activation = activation;
  s.B = B;
  // Active degrees never exceed base degrees, so both the diagonal and every
  // active-edge Metropolis weight stay at or above 1/(1 + max base degree).
  s.xi = 1.0 / (1.0 + static_cast<double>(max_degree(m, s.base_edges)));
  s.seed = seed;
  return s;
}

}  // namespace

MixingSchedule make_ring_schedule(int m, double activation, int B, std::uint64_t seed) {
  std::vector<Edge> edges;
  if (m == 2) {
    edges.push_back({0, 1});
  } else if (m >= 3) {
    for (int i = 0; i < m; ++i) edges.push_back({i, (i + 1) % m});
  }
  return finish_schedule(m, Topology::Ring, std::move(edges), activation, B, seed);
}

MixingSchedule make_complete_schedule(int m, double activation, int B, std::uint64_t seed) {
  std::vector<Edge> edges;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) edges.push_back({i, j});
  }
  return finish_schedule(m, Topology::Complete, std::move(edges), activation, B, seed);
}

MixingSchedule make_custom_schedule(int m, std::vector<Edge> edges, double activation,
                                    int B, std::uint64_t seed) {
  return finish_schedule(m, Topology::Custom, std::move(edges), activation, B, seed);
}

Matrix metropolis_matrix(int m, const std::vector<Edge>& active_edges) {
  if (m < 1) throw std::invalid_argument("metropolis_matrix: node count must be >= 1");
  std::vector<int> deg(static_cast<size_t>(m), 0);
  for (const auto& [i, j] : active_edges) {
    if (i < 0 || j < 0 || i >= m || j >= m || i == j) {
      throw std::invalid_argument("metropolis_matrix: edge endpoints out of range");
    }
    ++deg[static_cast<size_t>(i)];
    ++deg[static_cast<size_t>(j)];
  }
  Matrix A = Matrix::Zero(m, m);
  for (const auto& [i, j] : active_edges) {
    const double w = 1.0 / (1.0 + static_cast<double>(std::max(deg[i], deg[j])));
    A(i, j) += w;
    A(j, i) += w;
  }
  for (int i = 0; i < m; ++i) A(i, i) = 1.0 - A.row(i).sum();
  return A;
}

std::vector<Edge> active_edges(const MixingSchedule& sched, long t) {
  if (t < 1) throw std::invalid_argument("active_edges: round index must be >= 1");
  const auto total = sched.base_edges.size();
  if (total == 0) return {};
  if (sched.force_full_round && t % sched.B == 0) return sched.base_edges;
  auto k = static_cast<size_t>(
      std::ceil(sched.activation * static_cast<double>(total)));
  k = std::min(std::max<size_t>(k, 1), total);
  if (k == total) return sched.base_edges;
  Rng rng(mix64(sched.seed, static_cast<std::uint64_t>(t)));
  std::vector<Edge> chosen;
  chosen.reserve(k);
  for (std::uint64_t idx : rng.sample_indices(total, k)) {
    chosen.push_back(sched.base_edges[static_cast<size_t>(idx)]);
  }
  return chosen;
}

Matrix sample_matrix(const MixingSchedule& sched, long t) {
  return metropolis_matrix(sched.m, active_edges(sched, t));
}

Matrix transition_product(const MixingSchedule& sched, long t, long l) {
  if (l < 1 || t < l) {
    throw std::invalid_argument("transition_product: need t >= l >= 1");
  }
  Matrix P = sample_matrix(sched, l);
  for (long s = l + 1; s <= t; ++s) P = sample_matrix(sched, s) * P;
  return P;
}

MixingConstants mixing_constants(double xi, int m, int B) {
  if (!(xi > 0.0) || xi >= 1.0) {
    throw std::invalid_argument("mixing_constants: xi must lie in (0, 1)");
  }
  if (m < 1 || B < 1) {
    throw std::invalid_argument("mixing_constants: m and B must be >= 1");
  }
  const double base = 1.0 - xi / (4.0 * static_cast<double>(m) * static_cast<double>(m));
  MixingConstants c;
  c.alpha = 1.0 / (base * base);
  c.beta = std::pow(base, 1.0 / static_cast<double>(B));
  return c;
}

namespace {

bool window_connected(const MixingSchedule& sched, long start) {
  const int m = sched.m;
  if (m == 1) return true;
  std::vector<std::vector<int>> adj(static_cast<size_t>(m));
  for (long t = start; t < start + sched.B; ++t) {
    for (const auto& [i, j] : active_edges(sched, t)) {
      adj[static_cast<size_t>(i)].push_back(j);
      adj[static_cast<size_t>(j)].push_back(i);
    }
  }
  // Edges are undirected, so plain reachability from node 0 decides strong
  // connectivity of the union graph.
  std::vector<char> seen(static_cast<size_t>(m), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : adj[static_cast<size_t>(u)]) {
      if (!seen[static_cast<size_t>(v)]) {
        seen[static_cast<size_t>(v)] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == m;
}

}  // namespace

Assumption1Report verify_assumption1(const MixingSchedule& sched, long horizon) {
  if (horizon < sched.B) {
    throw std::invalid_argument("verify_assumption1: horizon must cover one window");
  }
  Assumption1Report rep;
  rep.min_diagonal = 1.0;
  rep.min_positive_entry = 1.0;
  rep.max_stochasticity_gap = 0.0;
  bool entries_ok = true;
  for (long t = 1; t <= horizon; ++t) {
    const Matrix A = sample_matrix(sched, t);
    for (int i = 0; i < sched.m; ++i) {
      rep.max_stochasticity_gap = std::max(
          {rep.max_stochasticity_gap, std::abs(A.row(i).sum() - 1.0),
           std::abs(A.col(i).sum() - 1.0)});
      rep.min_diagonal = std::min(rep.min_diagonal, A(i, i));
      for (int j = 0; j < sched.m; ++j) {
        if (A(i, j) < 0.0) entries_ok = false;
        if (i != j && A(i, j) > 0.0) {
          rep.min_positive_entry = std::min(rep.min_positive_entry, A(i, j));
        }
      }
    }
  }
  rep.connectivity_ok = true;
  for (long s = 1; s + sched.B - 1 <= horizon; ++s) {
    if (!window_connected(sched, s)) {
      rep.connectivity_ok = false;
      rep.first_bad_window = s;
      break;
    }
  }
  rep.ok = entries_ok && rep.connectivity_ok &&
           rep.max_stochasticity_gap <= 1e-12 &&
           rep.min_diagonal >= sched.xi - 1e-12 &&
           rep.min_positive_entry >= sched.xi - 1e-12;
  return rep;
}

double mixing_bound_check(const MixingSchedule& sched, int num_windows, int max_len,
                          std::uint64_t seed) {
  if (num_windows < 1 || max_len < 1) {
    throw std::invalid_argument("mixing_bound_check: need at least one window");
  }
  // A single node has xi = 1 and zero deviation at every length; any xi < 1
  // yields valid (trivially loose) constants to check against.
  const double xi = sched.xi < 1.0 ? sched.xi : 0.5;
  const MixingConstants mc = mixing_constants(xi, sched.m, sched.B);
  const double inv_m = 1.0 / static_cast<double>(sched.m);
  Rng rng(mix64(seed, 0x6d69786b /* "mixk" */));
  double worst = -std::numeric_limits<double>::infinity();
  for (int w = 0; w < num_windows; ++w) {
    const long l = 1 + static_cast<long>(rng.below(1000));
    const long len = 1 + static_cast<long>(rng.below(static_cast<std::uint64_t>(max_len)));
    const Matrix P = transition_product(sched, l + len - 1, l);
    const double dev = (P.array() - inv_m).abs().maxCoeff();
    worst = std::max(worst, dev - mc.alpha * std::pow(mc.beta, static_cast<double>(len)));
  }
  return worst;
}

}  // namespace dsmd
