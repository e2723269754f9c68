#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dpi::graph {

struct Edge {
  int a = 0, b = 0;
};

enum class WeightScheme { Metropolis };

// Undirected agent network with a symmetric doubly stochastic weight matrix.
//
// slem_A is the second-largest eigenvalue modulus of A (the mixing rate of the
// streaming update); slem_lazy is the same quantity for the lazy chain
// (A + I)/2, which drives the batch update whose exponents sum to 2.
// slem_A == 1 (periodic chain) is representable here; schedule computation
// rejects it where mixing is required.
struct Network {
  int n = 0;
  Eigen::MatrixXd weights;
  double slem_A = 0.0;
  double slem_lazy = 0.0;
};

// Build Metropolis-Hastings weights a_ij = 1/(1 + max(deg_i, deg_j)) on a
// connected simple graph; a_ii absorbs the remainder. Throws ConfigError on
// out-of-range vertices, self-loops, duplicate edges, or a disconnected graph.
Network build_network(const std::vector<Edge>& edges, int n,
                      WeightScheme scheme = WeightScheme::Metropolis);

// Wrap an explicit weight matrix (validated: symmetric, nonnegative, rows sum
// to 1 within 1e-9). Periodic chains pass validation with slem_A == 1.
Network network_from_weights(Eigen::MatrixXd weights);

// (Re)compute slem_A / slem_lazy from net.weights.
void spectral_constants(Network& net);

// Hop diameter of the connectivity pattern (positive off-diagonal weights).
int diameter(const Network& net);

std::vector<Edge> complete_edges(int n);
std::vector<Edge> path_edges(int n);
std::vector<Edge> cycle_edges(int n);
// Erdos-Renyi G(n, p); redraws (deterministically in seed) until connected.
std::vector<Edge> erdos_renyi_edges(int n, double p, std::uint64_t seed);

// Parse a named topology: "complete" | "path" | "cycle" |
// "erdos-renyi p=0.4 seed=7".
Network topology(const std::string& name, int n);

// Parse an edge list, one "i j" pair per line ('#' comments allowed).
std::vector<Edge> parse_edge_list(const std::string& text);

}  // namespace dpi::graph
