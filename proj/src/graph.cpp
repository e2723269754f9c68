#include "dpi/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "dpi/errors.hpp"
#include "dpi/rng.hpp"

namespace dpi::graph {

namespace {

std::vector<std::vector<int>> adjacency(const std::vector<Edge>& edges, int n) {
  std::vector<std::vector<int>> adj(n);
  for (const Edge& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  return adj;
}

bool connected(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  if (n == 0) return false;
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        q.push(v);
      }
    }
  }
  return count == n;
}

void validate_edges(const std::vector<Edge>& edges, int n) {
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : edges) {
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n) {
      throw ConfigError("edge (" + std::to_string(e.a) + ", " +
                        std::to_string(e.b) + ") out of range for n = " +
                        std::to_string(n));
    }
    if (e.a == e.b) {
      throw ConfigError("self-loop at vertex " + std::to_string(e.a));
    }
    auto key = std::minmax(e.a, e.b);
    if (!seen.insert(key).second) {
      throw ConfigError("duplicate edge (" + std::to_string(key.first) + ", " +
                        std::to_string(key.second) + ")");
    }
  }
}

}  // namespace

Network build_network(const std::vector<Edge>& edges, int n, WeightScheme scheme) {
  if (n < 1) throw ConfigError("network needs n >= 1");
  validate_edges(edges, n);
  const auto adj = adjacency(edges, n);
  if (n > 1 && !connected(adj)) throw ConfigError("graph is not connected");
  if (scheme != WeightScheme::Metropolis) throw ConfigError("unknown weight scheme");

  Network net;
  net.n = n;
  net.weights = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> deg(n);
  for (int i = 0; i < n; ++i) deg[i] = static_cast<int>(adj[i].size());
  for (const Edge& e : edges) {
    const double w = 1.0 / (1.0 + std::max(deg[e.a], deg[e.b]));
    net.weights(e.a, e.b) = w;
    net.weights(e.b, e.a) = w;
  }
  for (int i = 0; i < n; ++i) {
    net.weights(i, i) = 1.0 - net.weights.row(i).sum();
  }
  spectral_constants(net);
  return net;
}

Network network_from_weights(Eigen::MatrixXd weights) {
  const int n = static_cast<int>(weights.rows());
  if (n < 1 || weights.cols() != n) throw ConfigError("weight matrix must be square");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (weights(i, j) < -1e-12) throw ConfigError("negative weight");
      if (std::fabs(weights(i, j) - weights(j, i)) > 1e-9) {
        throw ConfigError("weight matrix not symmetric");
      }
    }
    if (std::fabs(weights.row(i).sum() - 1.0) > 1e-9) {
      throw ConfigError("row " + std::to_string(i) + " does not sum to 1");
    }
  }
  Network net;
  net.n = n;
  net.weights = std::move(weights);
  spectral_constants(net);
  return net;
}

void spectral_constants(Network& net) {
  const int n = net.n;
  if (n == 1) {
    net.slem_A = 0.0;
    net.slem_lazy = 0.0;
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(net.weights);
  if (es.info() != Eigen::Success) throw RunError("eigendecomposition failed");
  const Eigen::VectorXd ev = es.eigenvalues();  // ascending
  if (std::fabs(ev(n - 1) - 1.0) > 1e-10) {
    throw ConfigError("weight matrix is not stochastic (top eigenvalue != 1)");
  }
  net.slem_A = std::max(std::fabs(ev(0)), std::fabs(ev(n - 2)));
  // Lazy chain (A + I)/2 has eigenvalues (ev + 1)/2, all in [0, 1].
  net.slem_lazy = (ev(n - 2) + 1.0) / 2.0;
}

int diameter(const Network& net) {
  const int n = net.n;
  if (n == 1) return 0;
  int diam = 0;
  for (int s = 0; s < n; ++s) {
    std::vector<int> dist(n, -1);
    std::queue<int> q;
    q.push(s);
    dist[s] = 0;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v = 0; v < n; ++v) {
        if (v != u && net.weights(u, v) > 0.0 && dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
      }
    }
    for (int v = 0; v < n; ++v) {
      if (dist[v] < 0) throw ConfigError("graph is not connected");
      diam = std::max(diam, dist[v]);
    }
  }
  return diam;
}

std::vector<Edge> complete_edges(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  }
  return edges;
}

std::vector<Edge> path_edges(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return edges;
}

std::vector<Edge> cycle_edges(int n) {
  if (n == 2) return {{0, 1}};  // a 2-cycle would duplicate the edge
  auto edges = path_edges(n);
  if (n >= 3) edges.push_back({n - 1, 0});
  return edges;
}

std::vector<Edge> erdos_renyi_edges(int n, double p, std::uint64_t seed) {
  if (p <= 0.0 || p > 1.0) throw ConfigError("erdos-renyi needs p in (0, 1]");
  for (std::uint64_t attempt = 0; attempt < 200; ++attempt) {
    auto g = rng::Rng::substream(seed, {0x6772617068ull, attempt});
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (g.bernoulli(p)) edges.push_back({i, j});
      }
    }
    if (n == 1 || connected(adjacency(edges, n))) return edges;
  }
  throw ConfigError("could not draw a connected erdos-renyi graph; raise p");
}

Network topology(const std::string& name, int n) {
  std::istringstream in(name);
  std::string kind;
  in >> kind;
  if (kind == "complete") return build_network(complete_edges(n), n);
  if (kind == "path") return build_network(path_edges(n), n);
  if (kind == "cycle") return build_network(cycle_edges(n), n);
  if (kind == "erdos-renyi") {
    double p = 0.5;
    std::uint64_t seed = 1;
    std::string tok;
    while (in >> tok) {
      if (tok.rfind("p=", 0) == 0) {
        p = std::stod(tok.substr(2));
      } else if (tok.rfind("seed=", 0) == 0) {
        seed = std::stoull(tok.substr(5));
      } else {
        throw ConfigError("unknown erdos-renyi option: " + tok);
      }
    }
    return build_network(erdos_renyi_edges(n, p, seed), n);
  }
  throw ConfigError("unknown topology: " + name);
}

std::vector<Edge> parse_edge_list(const std::string& text) {
  std::vector<Edge> edges;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    int a, b;
    if (ls >> a) {
      if (!(ls >> b)) {
        throw ConfigError("edge list line " + std::to_string(lineno) +
                          ": expected two vertex ids");
      }
      edges.push_back({a, b});
    }
  }
  return edges;
}

}  // namespace dpi::graph
