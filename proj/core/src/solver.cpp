#include "crest/solver.hpp"

#include <chrono>
#include <cmath>

#include "crest/errors.hpp"

namespace crest {

NodeState* GraphView::node(const GridIndex& idx) {
  const long local = idx.time_index - first_time_index;
  if (local < 0 || local >= slice_count() || idx.space_index < 0 || idx.space_index >= nodes) {
    throw IndexOutOfWindow("factor references state outside the window");
  }
  return &(*slices)[static_cast<size_t>(local)].nodes[static_cast<size_t>(idx.space_index)];
}

const NodeState* GraphView::node(const GridIndex& idx) const {
  return const_cast<GraphView*>(this)->node(idx);
}

int GraphView::offset(const GridIndex& idx) const {
  return perturbation_offset(idx, first_time_index, slice_count(), nodes);
}

Eigen::SparseMatrix<double> NormalEquations::to_sparse() const {
  // Structural zeros inside blocks are kept: the scalar pattern then depends
  // only on the block layout, which lets the solver reuse its symbolic
  // factorization across Gauss-Newton iterations.
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(blocks.size() * kNodeDim * kNodeDim * 2);
  for (const auto& [key, block] : blocks) {
    const int r0 = key.first * kNodeDim;
    const int c0 = key.second * kNodeDim;
    for (int r = 0; r < kNodeDim; ++r) {
      for (int c = 0; c < kNodeDim; ++c) {
        const double v = block(r, c);
        triplets.emplace_back(r0 + r, c0 + c, v);
        if (key.first != key.second) triplets.emplace_back(c0 + c, r0 + r, v);
      }
    }
  }
  Eigen::SparseMatrix<double> out(dim, dim);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Eigen::MatrixXd NormalEquations::to_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& [key, block] : blocks) {
    out.block(key.first * kNodeDim, key.second * kNodeDim, kNodeDim, kNodeDim) = block;
    if (key.first != key.second) {
      out.block(key.second * kNodeDim, key.first * kNodeDim, kNodeDim, kNodeDim) =
          block.transpose();
    }
  }
  return out;
}

NormalEquations build_normal_equations(const GraphView& view) {
  NormalEquations ne;
  ne.dim = view.dim();
  ne.b = Eigen::VectorXd::Zero(ne.dim);

  std::vector<const NodeState*> states;
  for (const FactorPtr& factor : *view.factors) {
    const std::vector<GridIndex>& conn = factor->connected();
    states.clear();
    for (const GridIndex& idx : conn) states.push_back(view.node(idx));

    const FactorEval eval = factor->evaluate(states);
    const Eigen::MatrixXd& info = factor->noise().information();
    if (info.rows() != eval.error.size()) {
      throw SingularNoise("factor error dimension does not match its noise model");
    }
    std::vector<Eigen::MatrixXd> weighted(conn.size());
    for (size_t i = 0; i < conn.size(); ++i) weighted[i] = info * eval.jacobians[i];

    for (size_t i = 0; i < conn.size(); ++i) {
      const int bi = view.offset(conn[i]) / kNodeDim;
      ne.b.segment<kNodeDim>(bi * kNodeDim).noalias() -=
          eval.jacobians[i].transpose() * (info * eval.error);
      for (size_t j = i; j < conn.size(); ++j) {
        const int bj = view.offset(conn[j]) / kNodeDim;
        const Mat18 contrib = eval.jacobians[i].transpose() * weighted[j];
        if (bi <= bj) {
          auto [it, inserted] = ne.blocks.try_emplace({bi, bj}, contrib);
          if (!inserted) it->second += contrib;
        } else {
          auto [it, inserted] = ne.blocks.try_emplace({bj, bi}, contrib.transpose());
          if (!inserted) it->second += contrib.transpose();
        }
      }
    }
  }
  return ne;
}

double graph_cost(const GraphView& view) {
  double cost = 0.0;
  std::vector<const NodeState*> states;
  for (const FactorPtr& factor : *view.factors) {
    states.clear();
    for (const GridIndex& idx : factor->connected()) states.push_back(view.node(idx));
    const Eigen::VectorXd error = factor->error_only(states);
    cost += 0.5 * error.dot(factor->noise().information() * error);
  }
  return cost;
}

void retract_all(GraphView& view, const Eigen::VectorXd& delta, double alpha) {
  for (int k = 0; k < view.slice_count(); ++k) {
    for (int j = 0; j < view.nodes; ++j) {
      const int o = kNodeDim * (k * view.nodes + j);
      NodeState& n = (*view.slices)[static_cast<size_t>(k)].nodes[static_cast<size_t>(j)];
      n = retract(n, Vec18(alpha * delta.segment<kNodeDim>(o)));
    }
  }
}

void SpdSolver::factorize(const NormalEquations& ne) {
  Eigen::SparseMatrix<double> next = ne.to_sparse();
  const bool same_pattern =
      factorized_ && matrix_.rows() == next.rows() &&
      matrix_.nonZeros() == next.nonZeros() &&
      std::equal(matrix_.outerIndexPtr(), matrix_.outerIndexPtr() + matrix_.outerSize() + 1,
                 next.outerIndexPtr()) &&
      std::equal(matrix_.innerIndexPtr(), matrix_.innerIndexPtr() + matrix_.nonZeros(),
                 next.innerIndexPtr());
  matrix_ = std::move(next);
  if (same_pattern) {
    ldlt_.factorize(matrix_);
  } else {
    ldlt_.compute(matrix_);
  }
  auto healthy = [this]() {
    return ldlt_.info() == Eigen::Success && ldlt_.vectorD().minCoeff() > 0.0;
  };
  if (!healthy()) {
    // One regularization attempt, then fail loudly: an indefinite A signals
    // a modeling bug, not something to paper over.
    Eigen::VectorXd diag = matrix_.diagonal();
    for (int i = 0; i < matrix_.rows(); ++i) {
      matrix_.coeffRef(i, i) += 1e-10 * diag[i] + 1e-12;
    }
    ldlt_.compute(matrix_);
    if (!healthy()) {
      factorized_ = false;
      throw NotPositiveDefinite("normal equations not positive definite");
    }
  }
  factorized_ = true;
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = ldlt_.solve(rhs);
  x += ldlt_.solve(rhs - matrix_ * x);  // one refinement pass
  return x;
}

Eigen::MatrixXd SpdSolver::solve_dense(const Eigen::MatrixXd& rhs) const {
  // No refinement pass here: multi-column solves feed covariance extraction,
  // where the direct LDLT accuracy is already well below the tolerances.
  return ldlt_.solve(rhs);
}

Eigen::MatrixXd SpdSolver::inverse_block(int begin, int count) const {
  if (!factorized_) throw NotPositiveDefinite("solver not factorized");
  const auto& perm = ldlt_.permutationP();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim(), count);
  if (perm.size() > 0) {
    for (int c = 0; c < count; ++c) s(perm.indices()[begin + c], c) = 1.0;
  } else {
    s.block(begin, 0, count, count).setIdentity();
  }
  ldlt_.matrixL().solveInPlace(s);
  const Eigen::VectorXd dinv = ldlt_.vectorD().cwiseInverse();
  Eigen::MatrixXd block = s.transpose() * dinv.asDiagonal() * s;
  return 0.5 * (block + block.transpose());
}

Eigen::VectorXd solve_spd(const NormalEquations& ne) {
  SpdSolver solver;
  solver.factorize(ne);
  return solver.solve(ne.b);
}

SolveReport gauss_newton(GraphView& view, const SolveOptions& opts, SpdSolver* solver) {
  const auto start = std::chrono::steady_clock::now();
  SolveReport report;
  SpdSolver local;
  SpdSolver& spd = solver ? *solver : local;

  double cost = graph_cost(view);
  for (int it = 0; it < opts.max_iterations; ++it) {
    const NormalEquations ne = build_normal_equations(view);
    spd.factorize(ne);
    const Eigen::VectorXd delta = spd.solve(ne.b);
    if (!delta.allFinite()) throw NotPositiveDefinite("non-finite Gauss-Newton step");

    const std::vector<TimeSlice> backup = *view.slices;
    double alpha = 1.0;
    double trial_cost = 0.0;
    bool accepted = false;
    const double slack = 1e-12 * std::max(1.0, cost);
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      retract_all(view, delta, alpha);
      trial_cost = graph_cost(view);
      if (trial_cost <= cost + slack) {
        accepted = true;
        break;
      }
      *view.slices = backup;
      alpha *= 0.5;
    }
    if (!accepted) {
      report.iterations = it + 1;
      report.final_cost = cost;
      report.final_delta_norm = delta.lpNorm<Eigen::Infinity>();
      throw DivergedCost("cost increased after " + std::to_string(opts.max_halvings) +
                         " step halvings");
    }

    cost = trial_cost;
    report.costs.push_back(cost);
    report.iterations = it + 1;
    report.final_delta_norm = delta.lpNorm<Eigen::Infinity>();
    if (report.final_delta_norm < opts.delta_tol) {
      report.converged = true;
      break;
    }
  }
  report.final_cost = cost;
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

std::vector<Mat18> laplace_covariance(const SpdSolver& solver,
                                      const std::vector<std::pair<int, int>>& block_pairs) {
  if (!solver.factorized()) throw NotPositiveDefinite("solver not factorized");
  std::vector<Mat18> out;
  out.reserve(block_pairs.size());
  Eigen::MatrixXd rhs(solver.dim(), kNodeDim);
  for (const auto& [bi, bj] : block_pairs) {
    rhs.setZero();
    rhs.block<kNodeDim, kNodeDim>(bj * kNodeDim, 0).setIdentity();
    const Eigen::MatrixXd cols = solver.solve_dense(rhs);
    Mat18 block = cols.block<kNodeDim, kNodeDim>(bi * kNodeDim, 0);
    if (bi == bj) block = 0.5 * (block + block.transpose()).eval();
    out.push_back(block);
  }
  return out;
}

Eigen::MatrixXd laplace_covariance_range(const SpdSolver& solver, int begin, int count) {
  return solver.inverse_block(begin, count);
}

}  // namespace crest
