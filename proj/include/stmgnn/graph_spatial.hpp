#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

#include "stmgnn/activations.hpp"

namespace stmgnn {

/// Rectangular km grid over a city. Region index is row-major.
struct GridSpec {
  int rows = 1;
  int cols = 1;
  double cell_km = 3.0;
  double origin_lat = 0.0;  // south-west corner of the grid
  double origin_lon = 0.0;

  int n_regions() const { return rows * cols; }
  int region_index(int row, int col) const { return row * cols + col; }
  void validate() const;
};

enum class AdjacencyScheme { Rook4, Queen8 };

AdjacencyScheme adjacency_scheme_from_string(const std::string& s);
const char* to_string(AdjacencyScheme s);

/// Region graph: non-negative weighted adjacency plus its degree vector.
struct GraphSpec {
  int n_regions = 0;
  Eigen::MatrixXd adjacency;
  Eigen::VectorXd degree;

  static GraphSpec from_adjacency(Eigen::MatrixXd a);

  /// Plain-text edge list: header `n_regions N`, then `i j weight` triples
  /// in row-major order.
  void save(std::ostream& os) const;
  static GraphSpec load(std::istream& is);
  void save_file(const std::string& path) const;
  static GraphSpec load_file(const std::string& path);
};

/// Unit-weight grid adjacency: edge-sharing neighbours (Rook4) or
/// edge-or-corner neighbours (Queen8), optional unit self-loops.
GraphSpec build_grid_adjacency(const GridSpec& grid, AdjacencyScheme scheme,
                               bool self_loops);

/// Row-normalized transition matrix D^{-1} A. Throws NumericError naming
/// the first zero-degree node.
Eigen::MatrixXd transition_matrix(const GraphSpec& graph);

/// One diffusion layer: act(D^{-1} A H W + H B [+ bias]).
/// `transition` is the precomputed D^{-1} A. `bias` may be null.
Eigen::MatrixXd dgcn_layer_forward(const Eigen::MatrixXd& h,
                                   const Eigen::MatrixXd& transition,
                                   const Eigen::MatrixXd& w,
                                   const Eigen::MatrixXd& b_self,
                                   Activation act,
                                   const Eigen::VectorXd* bias = nullptr);

/// Convenience overload taking the graph itself.
Eigen::MatrixXd dgcn_layer_forward(const Eigen::MatrixXd& h,
                                   const GraphSpec& graph,
                                   const Eigen::MatrixXd& w,
                                   const Eigen::MatrixXd& b_self,
                                   Activation act,
                                   const Eigen::VectorXd* bias = nullptr);

struct DgcnCache {
  Eigen::MatrixXd input;       // H
  Eigen::MatrixXd diffused;    // D^{-1} A H
  Eigen::MatrixXd pre;         // pre-activation
};

Eigen::MatrixXd dgcn_layer_forward_cached(const Eigen::MatrixXd& h,
                                          const Eigen::MatrixXd& transition,
                                          const Eigen::MatrixXd& w,
                                          const Eigen::MatrixXd& b_self,
                                          Activation act,
                                          const Eigen::VectorXd* bias,
                                          DgcnCache& cache);

struct DgcnGrads {
  Eigen::MatrixXd d_input;
  Eigen::MatrixXd d_w;
  Eigen::MatrixXd d_b_self;
  Eigen::VectorXd d_bias;  // empty when the layer has no additive bias
};

DgcnGrads dgcn_layer_backward(const Eigen::MatrixXd& upstream,
                              const DgcnCache& cache,
                              const Eigen::MatrixXd& transition,
                              const Eigen::MatrixXd& w,
                              const Eigen::MatrixXd& b_self,
                              Activation act, bool has_bias);

}  // namespace stmgnn
