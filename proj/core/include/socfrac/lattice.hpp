#pragma once

// Three-layer lattice cell and global assembly.
//
// A square cell of side `a` carries
//   - a 3x3 sub-grid of displacement nodes joined by 20 trusses
//     (6 horizontal, 6 vertical, 8 sub-square diagonals),
//   - a 9-node biquadratic element used only for the coupling block Q,
//   - a 4-node bilinear element for the permeability block H.
//
// Units are mm, N, MPa, s. Densities are in t/mm^3 so that
// mass * mm/s^2 = N.

#include "socfrac/damage.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace socfrac::lattice {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class TrussKind { horizontal, vertical, diagonal };

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct LocalTruss {
    int a = 0;
    int b = 0;
    TrussKind kind = TrussKind::horizontal;
};

/// Local node k sits at (i * a/2, j * a/2) with k = 3*j + i.
/// Pressure nodes are the corners in the order (0,0), (a,0), (0,a), (a,a).
struct CellTopology {
    double size = 0.0;
    std::array<Point, 9> nodes{};
    std::array<LocalTruss, 20> trusses{};
    std::array<int, 4> pressure_nodes{0, 2, 6, 8};

    double truss_length(int t) const;
};

CellTopology build_cell_topology(double a);

struct MaterialParams {
    double e0 = 100.0;           // MPa
    double area = 1.0;           // mm^2
    double permeability = 1e-3;  // mm^2
    double viscosity = 1.0;      // MPa s
    double rho_s = 2.7e-9;       // t/mm^3
    double rho_w = 1.0e-9;       // t/mm^3
    double porosity = 0.3;
    std::array<double, 2> gravity{0.0, 0.0};  // mm/s^2

    double k_over_mu() const { return permeability / viscosity; }
    /// (1 - n) rho_s + n rho_w
    double mixture_density() const;
    void validate() const;
};

double mixture_density(double porosity, double rho_s, double rho_w);

/// Axial bar stiffness (E A / L) [d d^T, -d d^T; -d d^T, d d^T] on the DOFs
/// (ux_a, uy_a, ux_b, uy_b).
Eigen::Matrix4d truss_element_stiffness(Point a, Point b, double modulus, double area);

/// Q_cell = integral over the cell of (div N_u)^T N_p, 3x3 Gauss rule.
/// Rows follow local displacement DOFs (2k, 2k+1); columns follow
/// CellTopology::pressure_nodes.
Eigen::Matrix<double, 18, 4> cell_coupling_matrix(const CellTopology& topology);

/// H_cell = (k/mu) integral of grad N_p^T grad N_p, integrated exactly.
Eigen::Matrix4d cell_permeability_matrix(double permeability, double viscosity, double a);

/// Row-sum lumped 9-node mass, unit thickness. Diagonal entries are
/// rho a^2 * {1/36, 1/9, 4/9} for corner, edge and centre nodes.
Eigen::Matrix<double, 18, 18> cell_mass_matrix(double rho, double a);

/// Rectangular grid of n_x by n_y cells sharing nodes across edges.
///
/// Displacement node (ix, iy), 0 <= ix <= 2 n_x, has index iy (2 n_x + 1) + ix
/// and DOFs 2k, 2k+1. Pressure node (jx, jy) has index jy (n_x + 1) + jx and
/// DOF 2 N_u + index. Trusses are numbered cell-major: id = 20 cell + local.
class LatticeGrid {
public:
    struct Truss {
        int cell = 0;
        int node_a = 0;
        int node_b = 0;
        double length = 0.0;
        Eigen::Vector2d direction{1.0, 0.0};
        TrussKind kind = TrussKind::horizontal;
    };

    LatticeGrid(int nx, int ny, double cell_size);

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    double cell_size() const noexcept { return topology_.size; }
    const CellTopology& topology() const noexcept { return topology_; }

    int cell_count() const noexcept { return nx_ * ny_; }
    int u_nodes_x() const noexcept { return 2 * nx_ + 1; }
    int u_nodes_y() const noexcept { return 2 * ny_ + 1; }
    int p_nodes_x() const noexcept { return nx_ + 1; }
    int p_nodes_y() const noexcept { return ny_ + 1; }
    int u_node_count() const noexcept { return u_nodes_x() * u_nodes_y(); }
    int p_node_count() const noexcept { return p_nodes_x() * p_nodes_y(); }
    int u_dof_count() const noexcept { return 2 * u_node_count(); }
    int dof_count() const noexcept { return u_dof_count() + p_node_count(); }
    int truss_count() const noexcept { return static_cast<int>(trusses_.size()); }

    int u_node(int ix, int iy) const noexcept { return iy * u_nodes_x() + ix; }
    int p_node(int jx, int jy) const noexcept { return jy * p_nodes_x() + jx; }
    int p_dof(int p_node_index) const noexcept { return u_dof_count() + p_node_index; }
    /// Displacement node coincident with pressure node (jx, jy).
    int u_node_at_p_node(int jx, int jy) const noexcept { return u_node(2 * jx, 2 * jy); }

    Point u_node_position(int node) const;
    Point p_node_position(int node) const;

    std::array<int, 9> cell_u_nodes(int cell) const;
    std::array<int, 4> cell_p_nodes(int cell) const;

    const std::vector<Truss>& trusses() const noexcept { return trusses_; }

private:
    int nx_;
    int ny_;
    CellTopology topology_;
    std::vector<Truss> trusses_;
};

struct SystemMatrices {
    SparseMatrix K;  // 2N_u x 2N_u
    SparseMatrix M;  // 2N_u x 2N_u, diagonal
    SparseMatrix Q;  // 2N_u x N_p
    SparseMatrix H;  // N_p x N_p
};

/// Truss stiffness only. Trusses flagged false in `load_bearing` (when given)
/// and broken trusses contribute nothing.
SparseMatrix assemble_stiffness(const LatticeGrid& grid, std::span<const damage::TrussState> states,
                                double area, std::span<const std::uint8_t> load_bearing = {});

/// The damage-independent blocks M, Q, H (K left empty).
SystemMatrices assemble_constant_blocks(const LatticeGrid& grid, const MaterialParams& params);

SystemMatrices assemble_global(const LatticeGrid& grid, std::span<const damage::TrussState> states,
                               const MaterialParams& params);

/// Axial stress E_cur * elongation / L, tension positive. Broken trusses and
/// trusses flagged false in `load_bearing` report 0.
std::vector<double> recover_truss_stresses(const LatticeGrid& grid, const Vector& u,
                                           std::span<const damage::TrussState> states,
                                           std::span<const std::uint8_t> load_bearing = {});

/// Trusses that can carry load once dangling bonds are pruned.
///
/// A node whose remaining trusses do not span the plane (fewer than two
/// non-parallel bonds) cannot transmit load; its bonds are dropped and the
/// test is repeated until nothing changes. Nodes left without any bond are
/// reported in `isolated_nodes`.
struct LoadPath {
    std::vector<std::uint8_t> load_bearing;  // per truss, 1 = carries load
    std::vector<int> isolated_nodes;
};

LoadPath prune_dangling(const LatticeGrid& grid, std::span<const damage::TrussState> states);

}  // namespace socfrac::lattice
