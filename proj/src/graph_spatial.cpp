#include "stmgnn/graph_spatial.hpp"

#include <fstream>
#include <sstream>

#include "stmgnn/errors.hpp"
#include "stmgnn/text_format.hpp"

namespace stmgnn {

void GridSpec::validate() const {
  if (rows <= 0 || cols <= 0) throw UsageError("grid rows and cols must be positive");
  if (!(cell_km > 0.0)) throw UsageError("grid cell_km must be positive");
}

AdjacencyScheme adjacency_scheme_from_string(const std::string& s) {
  if (s == "rook4") return AdjacencyScheme::Rook4;
  if (s == "queen8") return AdjacencyScheme::Queen8;
  throw UsageError("unknown adjacency scheme: " + s);
}

const char* to_string(AdjacencyScheme s) {
  return s == AdjacencyScheme::Rook4 ? "rook4" : "queen8";
}

GraphSpec GraphSpec::from_adjacency(Eigen::MatrixXd a) {
  if (a.rows() != a.cols()) throw DataError("adjacency must be square");
  if ((a.array() < 0.0).any()) throw DataError("adjacency weights must be non-negative");
  GraphSpec g;
  g.n_regions = static_cast<int>(a.rows());
  g.degree = a.rowwise().sum();
  g.adjacency = std::move(a);
  return g;
}

GraphSpec build_grid_adjacency(const GridSpec& grid, AdjacencyScheme scheme,
                               bool self_loops) {
  grid.validate();
  const int n = grid.n_regions();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int row = 0; row < grid.rows; ++row) {
    for (int col = 0; col < grid.cols; ++col) {
      const int i = grid.region_index(row, col);
      if (self_loops) a(i, i) = 1.0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (scheme == AdjacencyScheme::Rook4 && dr != 0 && dc != 0) continue;
          const int nr = row + dr;
          const int nc = col + dc;
          if (nr < 0 || nr >= grid.rows || nc < 0 || nc >= grid.cols) continue;
          a(i, grid.region_index(nr, nc)) = 1.0;
        }
      }
    }
  }
  return GraphSpec::from_adjacency(std::move(a));
}

Eigen::MatrixXd transition_matrix(const GraphSpec& graph) {
  for (int i = 0; i < graph.n_regions; ++i) {
    if (!(graph.degree(i) > 0.0)) {
      std::ostringstream os;
      os << "transition_matrix: node " << i << " has zero degree";
      throw NumericError(os.str());
    }
  }
  return graph.degree.cwiseInverse().asDiagonal() * graph.adjacency;
}

namespace {

void check_dgcn_shapes(const Eigen::MatrixXd& h, const Eigen::MatrixXd& transition,
                       const Eigen::MatrixXd& w, const Eigen::MatrixXd& b_self,
                       const Eigen::VectorXd* bias) {
  if (transition.rows() != h.rows() || transition.cols() != h.rows()) {
    throw NumericError("dgcn: transition matrix does not match node count");
  }
  if (w.rows() != h.cols() || b_self.rows() != h.cols() || w.cols() != b_self.cols()) {
    throw NumericError("dgcn: weight shapes do not match input features");
  }
  if (bias != nullptr && bias->size() != w.cols()) {
    throw NumericError("dgcn: bias length does not match output features");
  }
}

}  // namespace

Eigen::MatrixXd dgcn_layer_forward_cached(const Eigen::MatrixXd& h,
                                          const Eigen::MatrixXd& transition,
                                          const Eigen::MatrixXd& w,
                                          const Eigen::MatrixXd& b_self,
                                          Activation act,
                                          const Eigen::VectorXd* bias,
                                          DgcnCache& cache) {
  check_dgcn_shapes(h, transition, w, b_self, bias);
  cache.input = h;
  cache.diffused = transition * h;
  cache.pre = cache.diffused * w + h * b_self;
  if (bias != nullptr) cache.pre.rowwise() += bias->transpose();
  Eigen::MatrixXd out = cache.pre.unaryExpr(
      [act](double v) { return apply_activation(act, v); });
  return out;
}

Eigen::MatrixXd dgcn_layer_forward(const Eigen::MatrixXd& h,
                                   const Eigen::MatrixXd& transition,
                                   const Eigen::MatrixXd& w,
                                   const Eigen::MatrixXd& b_self,
                                   Activation act,
                                   const Eigen::VectorXd* bias) {
  DgcnCache cache;
  return dgcn_layer_forward_cached(h, transition, w, b_self, act, bias, cache);
}

Eigen::MatrixXd dgcn_layer_forward(const Eigen::MatrixXd& h,
                                   const GraphSpec& graph,
                                   const Eigen::MatrixXd& w,
                                   const Eigen::MatrixXd& b_self,
                                   Activation act,
                                   const Eigen::VectorXd* bias) {
  return dgcn_layer_forward(h, transition_matrix(graph), w, b_self, act, bias);
}

DgcnGrads dgcn_layer_backward(const Eigen::MatrixXd& upstream,
                              const DgcnCache& cache,
                              const Eigen::MatrixXd& transition,
                              const Eigen::MatrixXd& w,
                              const Eigen::MatrixXd& b_self,
                              Activation act, bool has_bias) {
  Eigen::MatrixXd d_pre = upstream.cwiseProduct(cache.pre.unaryExpr(
      [act](double v) { return activation_deriv(act, v); }));
  DgcnGrads g;
  g.d_w = cache.diffused.transpose() * d_pre;
  g.d_b_self = cache.input.transpose() * d_pre;
  g.d_input = transition.transpose() * (d_pre * w.transpose()) +
              d_pre * b_self.transpose();
  if (has_bias) g.d_bias = d_pre.colwise().sum().transpose();
  return g;
}

void GraphSpec::save(std::ostream& os) const {
  os << "n_regions " << n_regions << "\n";
  for (int i = 0; i < n_regions; ++i) {
    for (int j = 0; j < n_regions; ++j) {
      if (adjacency(i, j) != 0.0) {
        os << i << " " << j << " " << format_double(adjacency(i, j)) << "\n";
      }
    }
  }
}

GraphSpec GraphSpec::load(std::istream& is) {
  std::string key;
  int n = 0;
  if (!(is >> key >> n) || key != "n_regions" || n <= 0) {
    throw DataError("graph file: expected 'n_regions N' header");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  int i, j;
  double w;
  while (is >> i >> j >> w) {
    if (i < 0 || i >= n || j < 0 || j >= n) {
      throw DataError("graph file: edge index out of range");
    }
    a(i, j) = w;
  }
  return GraphSpec::from_adjacency(std::move(a));
}

void GraphSpec::save_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  save(os);
}

GraphSpec GraphSpec::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  return load(is);
}

}  // namespace stmgnn
