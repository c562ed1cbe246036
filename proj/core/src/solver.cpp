#include "socfrac/solver.hpp"

#include "socfrac/errors.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/LU>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace socfrac::solver {

namespace {

// Largest number of DOFs a low-rank update may touch before refactorising.
constexpr std::size_t kMaxUpdateRank = 64;

void check_state(const SimState& s) {
    if (s.v.size() != s.a.size() || s.acc.size() != s.a.size()) {
        throw ConsistencyError("state vectors have inconsistent lengths");
    }
}

void append_block(std::vector<Eigen::Triplet<double>>& out, const SparseMatrix& m, Eigen::Index r0,
                  Eigen::Index c0, double scale = 1.0) {
    for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
            out.emplace_back(static_cast<int>(r0 + it.row()), static_cast<int>(c0 + it.col()),
                             scale * it.value());
        }
    }
}

}  // namespace

SimState SimState::zeros(Eigen::Index n, double t0) {
    SimState s;
    s.a = Vector::Zero(n);
    s.v = Vector::Zero(n);
    s.acc = Vector::Zero(n);
    s.t = t0;
    return s;
}

void Gn22Params::validate() const {
    if (!(beta1 >= 0.5) || !(beta2 >= beta1)) {
        throw InvalidParameter("GN22 requires beta2 >= beta1 >= 0.5");
    }
    if (!(dt > 0.0)) throw InvalidParameter("time step must be positive");
}

SparseMatrix block_matrix(const SparseMatrix& a11, const SparseMatrix& a12, const SparseMatrix& a21,
                          const SparseMatrix& a22) {
    const Eigen::Index r1 = a11.rows();
    const Eigen::Index c1 = a11.cols();
    if (a12.rows() != r1 || a21.cols() != c1 || a22.rows() != a21.rows() ||
        a22.cols() != a12.cols()) {
        throw ConsistencyError("block dimensions do not conform");
    }
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(a11.nonZeros() + a12.nonZeros() + a21.nonZeros() +
                                       a22.nonZeros()));
    append_block(t, a11, 0, 0);
    append_block(t, a12, 0, c1);
    append_block(t, a21, r1, 0);
    append_block(t, a22, r1, c1);
    SparseMatrix out(r1 + a21.rows(), c1 + a12.cols());
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

BlockSystem build_block_system(const lattice::SystemMatrices& mats) {
    const Eigen::Index nu = mats.K.rows();
    const Eigen::Index np = mats.H.rows();
    if (mats.K.cols() != nu || mats.M.rows() != nu || mats.M.cols() != nu || mats.Q.rows() != nu ||
        mats.Q.cols() != np || mats.H.cols() != np) {
        throw ConsistencyError("system matrices have inconsistent dimensions");
    }
    const SparseMatrix zu(nu, nu);
    const SparseMatrix zup(nu, np);
    const SparseMatrix zpu(np, nu);
    const SparseMatrix zp(np, np);
    const SparseMatrix qt = mats.Q.transpose();

    BlockSystem sys;
    sys.M = block_matrix(mats.M, zup, zpu, zp);
    sys.C = block_matrix(zu, zup, qt, zp);
    sys.K = block_matrix(mats.K, -mats.Q, zpu, mats.H);
    return sys;
}

Predictors gn22_predictors(const SimState& state, const Gn22Params& params) {
    params.validate();
    check_state(state);
    const double b1 = params.beta1;
    const double b2 = params.beta2;
    const double dt = params.dt;
    Predictors p;
    p.velocity = -(2.0 * b1 / (b2 * dt)) * state.a + (1.0 - 2.0 * b1 / b2) * state.v +
                 (1.0 - b1 / b2) * dt * state.acc;
    p.acceleration = -(2.0 / (b2 * dt * dt)) * state.a - (2.0 / (b2 * dt)) * state.v -
                     ((1.0 - b2) / b2) * state.acc;
    return p;
}

SparseMatrix effective_matrix(const BlockSystem& sys, const Gn22Params& params) {
    params.validate();
    const double cm = 2.0 / (params.beta2 * params.dt * params.dt);
    const double cc = 2.0 * params.beta1 / (params.beta2 * params.dt);
    SparseMatrix a = cm * sys.M + cc * sys.C + sys.K;
    return a;
}

Vector dynamic_solve(const BlockSystem& sys, const SimState& history, const Vector& f_next,
                     const Gn22Params& params, const Dirichlet& fixed) {
    check_state(history);
    if (f_next.size() != history.size() || sys.K.rows() != history.size()) {
        throw ConsistencyError("load/state/system sizes differ");
    }
    const Predictors pred = gn22_predictors(history, params);
    const SparseMatrix a = effective_matrix(sys, params);
    const Vector rhs = f_next - sys.C * pred.velocity - sys.M * pred.acceleration;
    return solve_constrained(a, rhs, fixed).x;
}

SimState gn22_correct(const SimState& history, const Vector& a_next, const Gn22Params& params) {
    const Predictors pred = gn22_predictors(history, params);
    SimState next;
    next.a = a_next;
    next.acc = (2.0 / (params.beta2 * params.dt * params.dt)) * a_next + pred.acceleration;
    next.v = (2.0 * params.beta1 / (params.beta2 * params.dt)) * a_next + pred.velocity;
    next.t = history.t + params.dt;
    return next;
}

SimState dynamic_step(const BlockSystem& sys, const SimState& state, const Vector& f_next,
                      const Gn22Params& params, const Dirichlet& fixed) {
    return gn22_correct(state, dynamic_solve(sys, state, f_next, params, fixed), params);
}

Vector consistent_acceleration(const BlockSystem& sys, const SimState& state, const Vector& f) {
    check_state(state);
    const Vector residual = f - sys.C * state.v - sys.K * state.a;
    const Vector mass = sys.M.diagonal();
    Vector acc = Vector::Zero(state.size());
    for (Eigen::Index i = 0; i < acc.size(); ++i) {
        if (mass[i] > 0.0) acc[i] = residual[i] / mass[i];
    }
    return acc;
}

Vector quasi_static_solve(const lattice::SystemMatrices& mats, const SimState& history,
                          const Vector& f_next, double dt, const Dirichlet& fixed, SymmetricSolver* cache) {
    if (!(dt > 0.0)) throw InvalidParameter("time step must be positive");
    check_state(history);
    const Eigen::Index nu = mats.K.rows();
    const Eigen::Index np = mats.H.rows();
    if (history.size() != nu + np || f_next.size() != nu + np) {
        throw ConsistencyError("load/state sizes differ from system");
    }
    // Pressure rows scaled by -dt: [[K, -Q], [-Q^T, -dt H]] is symmetric.
    const SparseMatrix qt = mats.Q.transpose();
    const SparseMatrix a = block_matrix(mats.K, -mats.Q, -qt, -dt * mats.H);
    Vector rhs = f_next;
    rhs.tail(np) = -dt * f_next.tail(np) - qt * history.a.head(nu);
    if (cache) return cache->solve(a, rhs, fixed);
    return solve_symmetric_constrained(a, rhs, fixed);
}

SimState quasi_static_step(const lattice::SystemMatrices& mats, const SimState& state,
                           const Vector& f_next, double dt, const Dirichlet& fixed) {
    SimState next;
    next.a = quasi_static_solve(mats, state, f_next, dt, fixed);
    next.v = (next.a - state.a) / dt;
    next.acc = Vector::Zero(next.a.size());
    next.t = state.t + dt;
    return next;
}

Vector solve_linear(const SparseMatrix& A, const Vector& b) {
    if (A.rows() != A.cols()) throw ConsistencyError("matrix is not square");
    if (b.size() != A.rows()) throw ConsistencyError("right-hand side size mismatch");
    const Eigen::Index n = A.rows();
    if (n == 0) return Vector();

    std::vector<bool> row_hit(static_cast<std::size_t>(n), false);
    for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
        bool col_hit = false;
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
            if (it.value() != 0.0) {
                col_hit = true;
                row_hit[static_cast<std::size_t>(it.row())] = true;
            }
        }
        if (!col_hit) {
            throw SolverError(SolverError::Kind::structural,
                              "structurally singular matrix: column " + std::to_string(k) +
                                  " is empty");
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!row_hit[static_cast<std::size_t>(i)]) {
            throw SolverError(SolverError::Kind::structural,
                              "structurally singular matrix: row " + std::to_string(i) +
                                  " is empty");
        }
    }

    SparseMatrix ac = A;
    ac.makeCompressed();
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(ac);
    lu.factorize(ac);
    if (lu.info() != Eigen::Success) {
        throw SolverError(SolverError::Kind::numerical,
                          "numerically singular matrix: " + lu.lastErrorMessage());
    }

    const double bnorm = b.norm();
    const double tol = 1e-10 * (bnorm > 0.0 ? bnorm : 1.0);
    Vector x = lu.solve(b);
    Vector r = b - ac * x;
    for (int refine = 0; refine < 4 && r.norm() > tol; ++refine) {
        x += lu.solve(r);
        r = b - ac * x;
    }
    if (!x.allFinite()) {
        throw SolverError(SolverError::Kind::numerical, "solution contains non-finite values");
    }
    if (r.norm() > tol) {
        // Fallback: BiCGSTAB started from the LU solution.
        Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>> it;
        it.setTolerance(1e-12);
        it.compute(ac);
        Vector y = it.solveWithGuess(b, x);
        const Vector ry = b - ac * y;
        if (ry.norm() < r.norm()) {
            x = y;
            r = ry;
        }
    }
    if (r.norm() > tol) {
        std::ostringstream msg;
        msg << "linear solve residual " << r.norm() / (bnorm > 0.0 ? bnorm : 1.0)
            << " exceeds 1e-10 relative";
        throw SolverError(SolverError::Kind::residual, msg.str());
    }
    return x;
}

ConstrainedSolution solve_constrained(const SparseMatrix& A, const Vector& b, const Dirichlet& fixed) {
    if (fixed.dofs.size() != fixed.values.size()) {
        throw ConsistencyError("Dirichlet dofs/values size mismatch");
    }
    const Eigen::Index n = A.rows();
    ConstrainedSolution out;
    if (fixed.dofs.empty()) {
        out.x = solve_linear(A, b);
        out.reactions = Vector();
        return out;
    }
    std::vector<int> slot(static_cast<std::size_t>(n), -1);
    for (std::size_t i = 0; i < fixed.dofs.size(); ++i) {
        const int d = fixed.dofs[i];
        if (d < 0 || d >= n) throw ConsistencyError("Dirichlet DOF out of range");
        if (slot[d] != -1) throw ConsistencyError("duplicate Dirichlet DOF " + std::to_string(d));
        slot[d] = static_cast<int>(i);
    }

    Vector rhs = b;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(A.nonZeros()) + fixed.dofs.size());
    for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
            const int r = static_cast<int>(it.row());
            const int c = static_cast<int>(it.col());
            if (slot[r] != -1) continue;
            if (slot[c] != -1) {
                rhs[r] -= it.value() * fixed.values[slot[c]];
                continue;
            }
            t.emplace_back(r, c, it.value());
        }
    }
    for (std::size_t i = 0; i < fixed.dofs.size(); ++i) {
        t.emplace_back(fixed.dofs[i], fixed.dofs[i], 1.0);
        rhs[fixed.dofs[i]] = fixed.values[i];
    }
    SparseMatrix reduced(n, n);
    reduced.setFromTriplets(t.begin(), t.end());
    out.x = solve_linear(reduced, rhs);
    for (std::size_t i = 0; i < fixed.dofs.size(); ++i) out.x[fixed.dofs[i]] = fixed.values[i];

    const Vector full = A * out.x - b;
    out.reactions.resize(static_cast<Eigen::Index>(fixed.dofs.size()));
    for (std::size_t i = 0; i < fixed.dofs.size(); ++i) {
        out.reactions[static_cast<Eigen::Index>(i)] = full[fixed.dofs[i]];
    }
    return out;
}

namespace {

bool same_pattern(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
    const auto outer = static_cast<std::size_t>(a.outerSize() + 1);
    const auto nnz = static_cast<std::size_t>(a.nonZeros());
    return std::equal(a.outerIndexPtr(), a.outerIndexPtr() + outer, b.outerIndexPtr()) &&
           std::equal(a.innerIndexPtr(), a.innerIndexPtr() + nnz, b.innerIndexPtr());
}

bool same_values(const SparseMatrix& a, const SparseMatrix& b) {
    const auto nnz = static_cast<std::size_t>(a.nonZeros());
    return std::equal(a.valuePtr(), a.valuePtr() + nnz, b.valuePtr());
}

}  // namespace

struct SymmetricSolver::Impl {
    using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

    SparseMatrix base;     // matrix held by the factorisation
    SparseMatrix current;  // matrix of the latest solve
    Ldlt ldlt;
    bool factored = false;

    // current = base + E_S delta E_S^T, solved by the Woodbury identity with
    // z = base^-1 E over every DOF touched since the last factorisation.
    std::vector<int> column;  // DOF -> column of z, -1 when absent
    std::vector<int> touched;
    Eigen::MatrixXd z;
    std::vector<int> active;  // S for `current`
    Eigen::MatrixXd delta;
    Eigen::MatrixXd z_active;
    Eigen::PartialPivLU<Eigen::MatrixXd> capacitance;

    void reset_update(Eigen::Index n) {
        column.assign(static_cast<std::size_t>(n), -1);
        touched.clear();
        z.resize(n, 0);
        active.clear();
    }

    Vector apply_inverse(const Vector& v) const {
        Vector y = ldlt.solve(v);
        if (active.empty()) return y;
        Vector ys(static_cast<Eigen::Index>(active.size()));
        for (std::size_t i = 0; i < active.size(); ++i) ys[static_cast<Eigen::Index>(i)] = y[active[i]];
        const Vector w = capacitance.solve(delta * ys);
        y.noalias() -= z_active * w;
        return y;
    }

    // Returns false when the update is not worthwhile or not safe.
    bool update(const SparseMatrix& next, std::size_t max_rank) {
        SparseMatrix d = next - base;
        d.prune([](Eigen::Index, Eigen::Index, double v) { return v != 0.0; });
        std::vector<int> rows;
        std::vector<char> seen(static_cast<std::size_t>(next.rows()), 0);
        for (Eigen::Index k = 0; k < d.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(d, k); it; ++it) {
                for (const Eigen::Index idx : {it.row(), it.col()}) {
                    if (!seen[idx]) {
                        seen[idx] = 1;
                        rows.push_back(static_cast<int>(idx));
                    }
                }
            }
        }
        std::sort(rows.begin(), rows.end());
        if (rows.size() > max_rank) return false;

        std::size_t fresh = 0;
        for (int r : rows) fresh += column[r] < 0 ? 1 : 0;
        if (touched.size() + fresh > max_rank) return false;
        if (fresh > 0) {
            z.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(touched.size() + fresh));
            for (int r : rows) {
                if (column[r] >= 0) continue;
                Vector e = Vector::Zero(next.rows());
                e[r] = 1.0;
                column[r] = static_cast<int>(touched.size());
                touched.push_back(r);
                z.col(column[r]) = ldlt.solve(e);
            }
        }

        const auto m = static_cast<Eigen::Index>(rows.size());
        std::vector<int> local(static_cast<std::size_t>(next.rows()), -1);
        for (Eigen::Index i = 0; i < m; ++i) local[rows[i]] = static_cast<int>(i);
        Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index k = 0; k < d.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(d, k); it; ++it) dm(local[it.row()], local[it.col()]) = it.value();
        }
        Eigen::MatrixXd za(next.rows(), m);
        for (Eigen::Index i = 0; i < m; ++i) za.col(i) = z.col(column[rows[i]]);
        Eigen::MatrixXd zs(m, m);
        for (Eigen::Index i = 0; i < m; ++i) zs.row(i) = za.row(rows[i]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(m, m) + dm * zs);
        if (!(lu.rcond() > 1e-12)) return false;

        active = std::move(rows);
        delta = std::move(dm);
        z_active = std::move(za);
        capacitance = std::move(lu);
        return true;
    }
};

SymmetricSolver::SymmetricSolver() : impl_(std::make_unique<Impl>()) {}
SymmetricSolver::~SymmetricSolver() = default;
SymmetricSolver::SymmetricSolver(SymmetricSolver&&) noexcept = default;
SymmetricSolver& SymmetricSolver::operator=(SymmetricSolver&&) noexcept = default;

Vector SymmetricSolver::solve(const SparseMatrix& A, const Vector& b, const Dirichlet& fixed) {
    if (A.rows() != A.cols()) throw ConsistencyError("matrix is not square");
    if (b.size() != A.rows()) throw ConsistencyError("right-hand side size mismatch");
    if (fixed.dofs.size() != fixed.values.size()) {
        throw ConsistencyError("Dirichlet dofs/values size mismatch");
    }
    const Eigen::Index n = A.rows();
    std::vector<int> slot(static_cast<std::size_t>(n), -1);
    for (std::size_t i = 0; i < fixed.dofs.size(); ++i) {
        const int d = fixed.dofs[i];
        if (d < 0 || d >= n) throw ConsistencyError("Dirichlet DOF out of range");
        if (slot[d] != -1) throw ConsistencyError("duplicate Dirichlet DOF " + std::to_string(d));
        slot[d] = static_cast<int>(i);
    }
    // Constrained rows and columns are kept as explicit zeros so that the
    // pattern, and with it the ordering, survives changes of the fixed set.
    Vector rhs = b;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(A.nonZeros()) + fixed.dofs.size());
    for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
            const int r = static_cast<int>(it.row());
            const int c = static_cast<int>(it.col());
            if (slot[r] != -1) {
                t.emplace_back(r, c, 0.0);
                continue;
            }
            if (slot[c] != -1) {
                rhs[r] -= it.value() * fixed.values[slot[c]];
                t.emplace_back(r, c, 0.0);
                continue;
            }
            t.emplace_back(r, c, it.value());
        }
    }
    for (std::size_t i = 0; i < fixed.dofs.size(); ++i) {
        t.emplace_back(fixed.dofs[i], fixed.dofs[i], 1.0);
        rhs[fixed.dofs[i]] = fixed.values[i];
    }
    SparseMatrix reduced(n, n);
    reduced.setFromTriplets(t.begin(), t.end(), [](double, double x) { return x; });
    reduced.makeCompressed();

    Impl& c = *impl_;
    const std::size_t max_rank = std::min<std::size_t>(kMaxUpdateRank, static_cast<std::size_t>(n) / 8);
    const bool unchanged = c.factored && same_pattern(reduced, c.current) && same_values(reduced, c.current);
    if (!unchanged) {
        const bool updated = c.factored && same_pattern(reduced, c.base) && c.update(reduced, max_rank);
        if (!updated) {
            if (!(c.factored && same_pattern(reduced, c.base))) {
                c.ldlt.analyzePattern(reduced);
                ++analyses_;
            }
            c.ldlt.factorize(reduced);
            ++factorizations_;
            c.base = reduced;
            c.factored = c.ldlt.info() == Eigen::Success;
            c.reset_update(n);
        }
        c.current = std::move(reduced);
    }

    const double bnorm = rhs.norm();
    const double tol = 1e-10 * (bnorm > 0.0 ? bnorm : 1.0);
    Vector x;
    bool ok = false;
    if (c.factored) {
        x = c.apply_inverse(rhs);
        Vector r = rhs - c.current * x;
        for (int refine = 0; refine < 4 && r.norm() > tol; ++refine) {
            x += c.apply_inverse(r);
            r = rhs - c.current * x;
        }
        ok = x.allFinite() && r.norm() <= tol;
    }
    if (!ok) x = solve_linear(c.current, rhs);
    for (std::size_t i = 0; i < fixed.dofs.size(); ++i) x[fixed.dofs[i]] = fixed.values[i];
    return x;
}

Vector solve_symmetric_constrained(const SparseMatrix& A, const Vector& b, const Dirichlet& fixed) {
    SymmetricSolver solver;
    return solver.solve(A, b, fixed);
}

}  // namespace socfrac::solver
