#pragma once

// Gauss-Newton on the window's nonlinear least-squares problem: block-sparse
// normal equations at 18x18 granularity, LDLT factorization in the natural
// time-major ordering (the grid keeps the bandwidth small by construction),
// and Laplace-approximation covariance extraction.

#include <map>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "crest/factors.hpp"
#include "crest/state.hpp"

namespace crest {

/// Mutable view of an ordered run of time slices plus the factors defined
/// over them. The solver and the window both work through this adapter.
struct GraphView {
  std::vector<TimeSlice>* slices = nullptr;
  long first_time_index = 0;  // global time index of slices->front()
  int nodes = 0;              // N states per slice
  const std::vector<FactorPtr>* factors = nullptr;

  int slice_count() const { return static_cast<int>(slices->size()); }
  int dim() const { return kNodeDim * nodes * slice_count(); }

  NodeState* node(const GridIndex& idx);
  const NodeState* node(const GridIndex& idx) const;
  int offset(const GridIndex& idx) const;
};

/// A = H^T W^{-1} H and b = -H^T W^{-1} e accumulated as 18x18 blocks over
/// the upper block triangle.
struct NormalEquations {
  int dim = 0;
  std::map<std::pair<int, int>, Mat18> blocks;  // key (bi, bj), bi <= bj
  Eigen::VectorXd b;

  Eigen::SparseMatrix<double> to_sparse() const;
  Eigen::MatrixXd to_dense() const;
};

NormalEquations build_normal_equations(const GraphView& view);

/// Total cost 0.5 * sum_f e_f^T Sigma_f^{-1} e_f at the current states.
double graph_cost(const GraphView& view);

/// Applies alpha * delta to every node through the retraction.
void retract_all(GraphView& view, const Eigen::VectorXd& delta, double alpha = 1.0);

/// Sparse LDLT in natural ordering with a single diagonal-regularization
/// retry; NotPositiveDefinite when that also fails.
class SpdSolver {
 public:
  void factorize(const NormalEquations& ne);
  bool factorized() const { return factorized_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve_dense(const Eigen::MatrixXd& rhs) const;
  /// Symmetric A^{-1} range block via one forward substitution per column:
  /// with A = L D L^T (natural ordering), the block is S^T D^{-1} S where
  /// S = L^{-1} E. Half the triangular work of a full solve.
  Eigen::MatrixXd inverse_block(int begin, int count) const;
  int dim() const { return static_cast<int>(matrix_.rows()); }

 private:
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower,
                        Eigen::NaturalOrdering<int>>
      ldlt_;
  bool factorized_ = false;
};

/// One-shot solve of A delta = b with one iterative-refinement pass.
Eigen::VectorXd solve_spd(const NormalEquations& ne);

struct SolveOptions {
  int max_iterations = 10;
  double delta_tol = 1e-6;  // infinity norm of the Gauss-Newton step
  int max_halvings = 5;
};

struct SolveReport {
  int iterations = 0;
  double final_delta_norm = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  double wall_ms = 0.0;            // filled by the window with the full step time
  std::vector<double> costs;       // cost after each accepted iterate
};

/// Iterates build -> solve -> retract until the step's infinity norm drops
/// below delta_tol or max_iterations is hit. Cost is kept non-increasing by
/// step halving; DivergedCost if the cost still grows after all halvings.
/// On return `solver` holds the factorization at the final linearization.
SolveReport gauss_newton(GraphView& view, const SolveOptions& opts, SpdSolver* solver);

/// Requested 18x18 blocks of A^{-1}, computed by solving per block column.
std::vector<Mat18> laplace_covariance(const SpdSolver& solver,
                                      const std::vector<std::pair<int, int>>& block_pairs);

/// Contiguous scalar-range block of A^{-1} (rows == cols == [begin, begin+count)).
Eigen::MatrixXd laplace_covariance_range(const SpdSolver& solver, int begin, int count);

}  // namespace crest
