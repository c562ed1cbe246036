#pragma once

// Time integration of the coupled displacement/pressure system
//
//   [M 0] [u'']   [0   0] [u']   [K  -Q] [u]   [f_u]
//   [0 0] [p''] + [Q^T 0] [p'] + [0   H] [p] = [f_p]
//
// written compactly as M a'' + C a' + K a = f with a = [u, p].
// Dynamics use the GN22 (generalized Newmark, beta1/beta2) scheme, quasi-statics
// a backward difference of Q^T u'.

#include "socfrac/lattice.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>
#include <vector>

namespace socfrac::solver {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

struct SimState {
    Vector a;    // [u (mm), p (MPa)]
    Vector v;    // first time derivative
    Vector acc;  // second time derivative
    double t = 0.0;

    static SimState zeros(Eigen::Index n, double t0 = 0.0);
    Eigen::Index size() const noexcept { return a.size(); }
};

/// GN22 parameters; beta2 >= beta1 >= 0.5 and dt > 0.
struct Gn22Params {
    double beta1 = 0.6;
    double beta2 = 0.65;
    double dt = 1.0;

    void validate() const;
};

/// Block operators of the compact form, all (2N_u + N_p) square.
/// K is unsymmetric whenever Q != 0.
struct BlockSystem {
    SparseMatrix M;
    SparseMatrix C;
    SparseMatrix K;
};

BlockSystem build_block_system(const lattice::SystemMatrices& mats);

/// Prescribed values for a set of DOFs. DOFs must be unique.
struct Dirichlet {
    std::vector<int> dofs;
    std::vector<double> values;

    void add(int dof, double value) {
        dofs.push_back(dof);
        values.push_back(value);
    }
    std::size_t size() const noexcept { return dofs.size(); }
};

/// History-only parts of the GN22 velocity and acceleration:
///   v_hat = -(2 b1 / (b2 dt)) a_n + (1 - 2 b1 / b2) v_n + (1 - b1 / b2) dt acc_n
///   a_hat = -(2 / (b2 dt^2)) a_n - (2 / (b2 dt)) v_n - ((1 - b2) / b2) acc_n
struct Predictors {
    Vector velocity;
    Vector acceleration;
};

Predictors gn22_predictors(const SimState& state, const Gn22Params& params);

/// A = (2 / (b2 dt^2)) M + (2 b1 / (b2 dt)) C + K
SparseMatrix effective_matrix(const BlockSystem& sys, const Gn22Params& params);

/// a_{n+1} solving A a_{n+1} = f_{n+1} - C v_hat - M a_hat, with the Dirichlet
/// DOFs eliminated. Derivatives are not updated; see gn22_correct().
Vector dynamic_solve(const BlockSystem& sys, const SimState& history, const Vector& f_next,
                     const Gn22Params& params, const Dirichlet& fixed = {});

/// Completes a step: acc = (2/(b2 dt^2)) a_{n+1} + a_hat, v = (2 b1/(b2 dt)) a_{n+1} + v_hat.
SimState gn22_correct(const SimState& history, const Vector& a_next, const Gn22Params& params);

SimState dynamic_step(const BlockSystem& sys, const SimState& state, const Vector& f_next,
                      const Gn22Params& params, const Dirichlet& fixed = {});

/// Acceleration satisfying the equation of motion at the current state on
/// DOFs with positive (diagonal) mass; zero elsewhere.
Vector consistent_acceleration(const BlockSystem& sys, const SimState& state, const Vector& f);

class SymmetricSolver;

/// Solves [[K, -Q], [Q^T/dt, H]] [u, p]_{n+1} = [f_u, f_p + Q^T u_n / dt].
/// A SymmetricSolver passed as `cache` keeps its factorisation between calls.
Vector quasi_static_solve(const lattice::SystemMatrices& mats, const SimState& history,
                          const Vector& f_next, double dt, const Dirichlet& fixed = {},
                          SymmetricSolver* cache = nullptr);

/// quasi_static_solve plus state update: v = (a_{n+1} - a_n) / dt, acc = 0.
SimState quasi_static_step(const lattice::SystemMatrices& mats, const SimState& state,
                           const Vector& f_next, double dt, const Dirichlet& fixed = {});

/// Direct sparse LU with iterative refinement. Guarantees
/// ||Ax - b|| <= 1e-10 ||b|| or throws SolverError. Empty rows/columns raise
/// SolverError::Kind::structural, zero pivots Kind::numerical.
Vector solve_linear(const SparseMatrix& A, const Vector& b);

struct ConstrainedSolution {
    Vector x;
    Vector reactions;  // (A x - b) on the constrained DOFs, same order as Dirichlet::dofs
};

/// Row/column elimination of the Dirichlet DOFs, solve, and reaction recovery.
ConstrainedSolution solve_constrained(const SparseMatrix& A, const Vector& b, const Dirichlet& fixed);

/// Symmetric variant of solve_constrained (sparse LDL^T with refinement, LU
/// fallback) for quasi-definite systems. Only the solution is returned.
/// The factorisation is reused while the reduced matrix is bit-identical and the
/// ordering while its sparsity pattern is unchanged.
class SymmetricSolver {
public:
    SymmetricSolver();
    ~SymmetricSolver();
    SymmetricSolver(SymmetricSolver&&) noexcept;
    SymmetricSolver& operator=(SymmetricSolver&&) noexcept;

    Vector solve(const SparseMatrix& A, const Vector& b, const Dirichlet& fixed);

    std::size_t factorizations() const noexcept { return factorizations_; }
    std::size_t analyses() const noexcept { return analyses_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t factorizations_ = 0;
    std::size_t analyses_ = 0;
};

Vector solve_symmetric_constrained(const SparseMatrix& A, const Vector& b, const Dirichlet& fixed);

/// Assembles a 2x2 block matrix from sparse blocks (empty blocks allowed when
/// sized consistently).
SparseMatrix block_matrix(const SparseMatrix& a11, const SparseMatrix& a12, const SparseMatrix& a21,
                          const SparseMatrix& a22);

}  // namespace socfrac::solver
