#include "socfrac/lattice.hpp"

#include "socfrac/errors.hpp"

#include <cmath>
#include <string>

namespace socfrac::lattice {

namespace {

constexpr std::array<double, 3> kGauss3Points{-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr std::array<double, 3> kGauss3Weights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
constexpr std::array<double, 2> kGauss2Points{-0.5773502691896258, 0.5773502691896258};

// Quadratic Lagrange basis on [-1, 1] with nodes -1, 0, 1.
std::array<double, 3> quadratic(double xi) {
    return {0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)};
}

std::array<double, 3> quadratic_derivative(double xi) {
    return {xi - 0.5, -2.0 * xi, xi + 0.5};
}

// Bilinear corner shapes on the unit square, corner order (0,0),(1,0),(0,1),(1,1).
std::array<double, 4> bilinear(double s, double t) {
    return {(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t};
}

std::array<std::array<double, 2>, 4> bilinear_gradient(double s, double t) {
    return {{{-(1 - t), -(1 - s)}, {(1 - t), -s}, {-t, (1 - s)}, {t, s}}};
}

}  // namespace

double CellTopology::truss_length(int t) const {
    const auto& tr = trusses.at(static_cast<std::size_t>(t));
    return std::hypot(nodes[tr.b].x - nodes[tr.a].x, nodes[tr.b].y - nodes[tr.a].y);
}

CellTopology build_cell_topology(double a) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw InvalidParameter("cell size must be positive, got " + std::to_string(a));
    }
    CellTopology topo;
    topo.size = a;
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
            topo.nodes[3 * j + i] = {0.5 * a * i, 0.5 * a * j};
        }
    }
    std::size_t n = 0;
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 2; ++i) {
            topo.trusses[n++] = {3 * j + i, 3 * j + i + 1, TrussKind::horizontal};
        }
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 2; ++j) {
            topo.trusses[n++] = {3 * j + i, 3 * (j + 1) + i, TrussKind::vertical};
        }
    }
    for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
            const int ll = 3 * j + i;
            topo.trusses[n++] = {ll, ll + 4, TrussKind::diagonal};      // lower-left to upper-right
            topo.trusses[n++] = {ll + 1, ll + 3, TrussKind::diagonal};  // lower-right to upper-left
        }
    }
    return topo;
}

double mixture_density(double porosity, double rho_s, double rho_w) {
    return (1.0 - porosity) * rho_s + porosity * rho_w;
}

double MaterialParams::mixture_density() const {
    return lattice::mixture_density(porosity, rho_s, rho_w);
}

void MaterialParams::validate() const {
    if (!(e0 > 0.0)) throw InvalidParameter("E0 must be positive");
    if (!(area > 0.0)) throw InvalidParameter("truss area must be positive");
    if (!(permeability > 0.0)) throw InvalidParameter("permeability must be positive");
    if (!(viscosity > 0.0)) throw InvalidParameter("viscosity must be positive");
    if (!(porosity > 0.0 && porosity < 1.0)) throw InvalidParameter("porosity must lie in (0, 1)");
    if (rho_s < 0.0 || rho_w < 0.0) throw InvalidParameter("densities must be non-negative");
}

Eigen::Matrix4d truss_element_stiffness(Point a, Point b, double modulus, double area) {
    if (modulus < 0.0) throw InvalidParameter("truss modulus must be non-negative");
    if (!(area > 0.0)) throw InvalidParameter("truss area must be positive");
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double length = std::hypot(dx, dy);
    if (!(length > 0.0)) throw GeometryError("zero-length truss");

    const Eigen::Vector2d d(dx / length, dy / length);
    const Eigen::Matrix2d dd = (modulus * area / length) * (d * d.transpose());
    Eigen::Matrix4d k;
    k << dd, -dd, -dd, dd;
    return k;
}

Eigen::Matrix<double, 18, 4> cell_coupling_matrix(const CellTopology& topology) {
    const double a = topology.size;
    const double jac = 0.25 * a * a;  // dx dy = (a/2)^2 dxi deta
    const double dxi_dx = 2.0 / a;
    Eigen::Matrix<double, 18, 4> q = Eigen::Matrix<double, 18, 4>::Zero();

    for (std::size_t gi = 0; gi < 3; ++gi) {
        for (std::size_t gj = 0; gj < 3; ++gj) {
            const double xi = kGauss3Points[gi];
            const double eta = kGauss3Points[gj];
            const double w = kGauss3Weights[gi] * kGauss3Weights[gj] * jac;
            const auto lx = quadratic(xi);
            const auto ly = quadratic(eta);
            const auto dlx = quadratic_derivative(xi);
            const auto dly = quadratic_derivative(eta);
            const auto np = bilinear(0.5 * (xi + 1.0), 0.5 * (eta + 1.0));
            for (int j = 0; j < 3; ++j) {
                for (int i = 0; i < 3; ++i) {
                    const int k = 3 * j + i;
                    const double dndx = dlx[i] * ly[j] * dxi_dx;
                    const double dndy = lx[i] * dly[j] * dxi_dx;
                    for (int p = 0; p < 4; ++p) {
                        q(2 * k, p) += w * dndx * np[p];
                        q(2 * k + 1, p) += w * dndy * np[p];
                    }
                }
            }
        }
    }
    return q;
}

Eigen::Matrix4d cell_permeability_matrix(double permeability, double viscosity, double a) {
    if (!(permeability > 0.0) || !(viscosity > 0.0) || !(a > 0.0)) {
        throw InvalidParameter("permeability, viscosity and cell size must be positive");
    }
    // Gradients in physical space scale as 1/a and the area as a^2, so the
    // 2D Laplacian block is independent of a. 2x2 Gauss is exact here.
    Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
    for (double gs : kGauss2Points) {
        for (double gt : kGauss2Points) {
            const auto g = bilinear_gradient(0.5 * (gs + 1.0), 0.5 * (gt + 1.0));
            const double w = 0.25;  // unit-square weight of each point
            for (int i = 0; i < 4; ++i) {
                for (int j = 0; j < 4; ++j) {
                    h(i, j) += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
    }
    return (permeability / viscosity) * h;
}

Eigen::Matrix<double, 18, 18> cell_mass_matrix(double rho, double a) {
    if (rho < 0.0) throw InvalidParameter("density must be non-negative");
    if (!(a > 0.0)) throw InvalidParameter("cell size must be positive");
    // Row sum of the consistent mass equals rho * integral(N_k) because the
    // shapes sum to one.
    const std::array<double, 3> w1{1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
    Eigen::Matrix<double, 18, 18> m = Eigen::Matrix<double, 18, 18>::Zero();
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
            const int k = 3 * j + i;
            const double mk = rho * a * a * w1[i] * w1[j];
            m(2 * k, 2 * k) = mk;
            m(2 * k + 1, 2 * k + 1) = mk;
        }
    }
    return m;
}

LatticeGrid::LatticeGrid(int nx, int ny, double cell_size)
    : nx_(nx), ny_(ny), topology_(build_cell_topology(cell_size)) {
    if (nx < 1 || ny < 1) throw InvalidParameter("grid needs at least one cell per direction");
    trusses_.reserve(static_cast<std::size_t>(20 * nx * ny));
    for (int c = 0; c < cell_count(); ++c) {
        const auto nodes = cell_u_nodes(c);
        for (const auto& lt : topology_.trusses) {
            Truss t;
            t.cell = c;
            t.node_a = nodes[lt.a];
            t.node_b = nodes[lt.b];
            t.kind = lt.kind;
            const Point pa = topology_.nodes[lt.a];
            const Point pb = topology_.nodes[lt.b];
            t.length = std::hypot(pb.x - pa.x, pb.y - pa.y);
            t.direction = Eigen::Vector2d((pb.x - pa.x) / t.length, (pb.y - pa.y) / t.length);
            trusses_.push_back(t);
        }
    }
}

Point LatticeGrid::u_node_position(int node) const {
    const int ix = node % u_nodes_x();
    const int iy = node / u_nodes_x();
    return {0.5 * cell_size() * ix, 0.5 * cell_size() * iy};
}

Point LatticeGrid::p_node_position(int node) const {
    const int jx = node % p_nodes_x();
    const int jy = node / p_nodes_x();
    return {cell_size() * jx, cell_size() * jy};
}

std::array<int, 9> LatticeGrid::cell_u_nodes(int cell) const {
    const int cx = cell % nx_;
    const int cy = cell / nx_;
    std::array<int, 9> out{};
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
            out[3 * j + i] = u_node(2 * cx + i, 2 * cy + j);
        }
    }
    return out;
}

std::array<int, 4> LatticeGrid::cell_p_nodes(int cell) const {
    const int cx = cell % nx_;
    const int cy = cell / nx_;
    return {p_node(cx, cy), p_node(cx + 1, cy), p_node(cx, cy + 1), p_node(cx + 1, cy + 1)};
}

SparseMatrix assemble_stiffness(const LatticeGrid& grid, std::span<const damage::TrussState> states,
                                double area, std::span<const std::uint8_t> load_bearing) {
    if (static_cast<int>(states.size()) != grid.truss_count()) {
        throw ConsistencyError("truss state count " + std::to_string(states.size()) +
                               " does not match grid truss count " +
                               std::to_string(grid.truss_count()));
    }
    if (!load_bearing.empty() && load_bearing.size() != states.size()) {
        throw ConsistencyError("load-bearing mask size mismatch");
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(states.size() * 16);
    const auto& trusses = grid.trusses();
    for (std::size_t t = 0; t < trusses.size(); ++t) {
        // Inactive trusses still place explicit zeros: the pattern depends on the grid only.
        const bool active = load_bearing.empty() || load_bearing[t];
        const double e = active ? states[t].effective_modulus() : 0.0;
        const auto& tr = trusses[t];
        const Eigen::Matrix2d dd = (e * area / tr.length) * (tr.direction * tr.direction.transpose());
        const std::array<int, 4> dofs{2 * tr.node_a, 2 * tr.node_a + 1, 2 * tr.node_b,
                                      2 * tr.node_b + 1};
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                const double sign = ((r < 2) == (c < 2)) ? 1.0 : -1.0;
                triplets.emplace_back(dofs[r], dofs[c], sign * dd(r % 2, c % 2));
            }
        }
    }
    SparseMatrix k(grid.u_dof_count(), grid.u_dof_count());
    k.setFromTriplets(triplets.begin(), triplets.end());
    return k;
}

SystemMatrices assemble_constant_blocks(const LatticeGrid& grid, const MaterialParams& params) {
    params.validate();
    const auto q_cell = cell_coupling_matrix(grid.topology());
    const auto h_cell =
        cell_permeability_matrix(params.permeability, params.viscosity, grid.cell_size());
    const auto m_cell = cell_mass_matrix(params.mixture_density(), grid.cell_size());

    std::vector<Eigen::Triplet<double>> tq;
    std::vector<Eigen::Triplet<double>> th;
    std::vector<Eigen::Triplet<double>> tm;
    tq.reserve(static_cast<std::size_t>(grid.cell_count()) * 72);
    th.reserve(static_cast<std::size_t>(grid.cell_count()) * 16);
    tm.reserve(static_cast<std::size_t>(grid.cell_count()) * 18);
    for (int c = 0; c < grid.cell_count(); ++c) {
        const auto un = grid.cell_u_nodes(c);
        const auto pn = grid.cell_p_nodes(c);
        for (int k = 0; k < 9; ++k) {
            for (int d = 0; d < 2; ++d) {
                const int row = 2 * un[k] + d;
                tm.emplace_back(row, row, m_cell(2 * k + d, 2 * k + d));
                for (int p = 0; p < 4; ++p) {
                    tq.emplace_back(row, pn[p], q_cell(2 * k + d, p));
                }
            }
        }
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) th.emplace_back(pn[i], pn[j], h_cell(i, j));
        }
    }
    SystemMatrices s;
    s.M.resize(grid.u_dof_count(), grid.u_dof_count());
    s.M.setFromTriplets(tm.begin(), tm.end());
    s.Q.resize(grid.u_dof_count(), grid.p_node_count());
    s.Q.setFromTriplets(tq.begin(), tq.end());
    s.H.resize(grid.p_node_count(), grid.p_node_count());
    s.H.setFromTriplets(th.begin(), th.end());
    s.K.resize(grid.u_dof_count(), grid.u_dof_count());
    return s;
}

SystemMatrices assemble_global(const LatticeGrid& grid, std::span<const damage::TrussState> states,
                               const MaterialParams& params) {
    SystemMatrices s = assemble_constant_blocks(grid, params);
    s.K = assemble_stiffness(grid, states, params.area);
    return s;
}

std::vector<double> recover_truss_stresses(const LatticeGrid& grid, const Vector& u,
                                           std::span<const damage::TrussState> states,
                                           std::span<const std::uint8_t> load_bearing) {
    if (u.size() < grid.u_dof_count()) {
        throw ConsistencyError("displacement vector shorter than the displacement DOF count");
    }
    if (static_cast<int>(states.size()) != grid.truss_count()) {
        throw ConsistencyError("truss state count does not match grid");
    }
    const auto& trusses = grid.trusses();
    std::vector<double> sigma(trusses.size(), 0.0);
    for (std::size_t t = 0; t < trusses.size(); ++t) {
        // Inactive trusses still place explicit zeros: the pattern depends on the grid only.
        const bool active = load_bearing.empty() || load_bearing[t];
        const double e = active ? states[t].effective_modulus() : 0.0;
        const auto& tr = trusses[t];
        const double dux = u[2 * tr.node_b] - u[2 * tr.node_a];
        const double duy = u[2 * tr.node_b + 1] - u[2 * tr.node_a + 1];
        const double elongation = dux * tr.direction.x() + duy * tr.direction.y();
        sigma[t] = e * elongation / tr.length;
    }
    return sigma;
}

LoadPath prune_dangling(const LatticeGrid& grid, std::span<const damage::TrussState> states) {
    const auto& trusses = grid.trusses();
    LoadPath path;
    path.load_bearing.assign(trusses.size(), 0);
    for (std::size_t t = 0; t < trusses.size(); ++t) path.load_bearing[t] = states[t].broken ? 0 : 1;

    std::vector<std::vector<int>> incident(static_cast<std::size_t>(grid.u_node_count()));
    for (std::size_t t = 0; t < trusses.size(); ++t) {
        incident[trusses[t].node_a].push_back(static_cast<int>(t));
        incident[trusses[t].node_b].push_back(static_cast<int>(t));
    }

    // A node spans the plane when at least two of its live bonds are not
    // parallel: det of sum(d d^T) > 0.
    auto spans_plane = [&](int node) {
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (int t : incident[node]) {
            if (!path.load_bearing[t]) continue;
            const auto& d = trusses[t].direction;
            sxx += d.x() * d.x();
            sxy += d.x() * d.y();
            syy += d.y() * d.y();
        }
        return sxx * syy - sxy * sxy > 1e-9;
    };

    std::vector<int> queue;
    for (int n = 0; n < grid.u_node_count(); ++n) queue.push_back(n);
    std::vector<bool> queued(static_cast<std::size_t>(grid.u_node_count()), true);
    while (!queue.empty()) {
        const int n = queue.back();
        queue.pop_back();
        queued[n] = false;
        if (spans_plane(n)) continue;
        for (int t : incident[n]) {
            if (!path.load_bearing[t]) continue;
            path.load_bearing[t] = 0;
            const int other = trusses[t].node_a == n ? trusses[t].node_b : trusses[t].node_a;
            if (!queued[other]) {
                queued[other] = true;
                queue.push_back(other);
            }
        }
    }
    for (int n = 0; n < grid.u_node_count(); ++n) {
        bool any = false;
        for (int t : incident[n]) any = any || path.load_bearing[t];
        if (!any) path.isolated_nodes.push_back(n);
    }
    return path;
}

}  // namespace socfrac::lattice
