#pragma once

#include <array>
#include <cassert>

namespace ddrom {

/// Uniform structured quadrilateral mesh on an axis-aligned box.
///
/// Nodes form an (nx+1) x (ny+1) lattice. All nodes on the box boundary carry
/// Dirichlet data and are eliminated from the algebraic system; the remaining
/// free nodes form an (nx-1) x (ny-1) lattice indexed row-major in x.
struct StructuredMesh {
  int nx = 0;  ///< elements along x1
  int ny = 0;  ///< elements along x2
  std::array<double, 4> domain_box{0.0, 1.0, 0.0, 1.0};  ///< {x1min,x1max,x2min,x2max}
  int dofs_per_node = 1;

  int num_nodes() const { return (nx + 1) * (ny + 1); }
  int num_elements() const { return nx * ny; }
  int free_nx() const { return nx - 1; }
  int free_ny() const { return ny - 1; }
  int num_free_nodes() const { return free_nx() * free_ny(); }
  int num_free_dofs() const { return num_free_nodes() * dofs_per_node; }

  double hx() const { return (domain_box[1] - domain_box[0]) / nx; }
  double hy() const { return (domain_box[3] - domain_box[2]) / ny; }

  /// Coordinate of lattice node (gi, gj), gi in [0, nx], gj in [0, ny].
  double node_x1(int gi) const { return domain_box[0] + gi * hx(); }
  double node_x2(int gj) const { return domain_box[2] + gj * hy(); }

  bool is_boundary_node(int gi, int gj) const {
    return gi == 0 || gi == nx || gj == 0 || gj == ny;
  }

  /// Free-node index for lattice node (gi, gj); requires the node be free.
  int free_node(int gi, int gj) const {
    assert(!is_boundary_node(gi, gj));
    return (gj - 1) * free_nx() + (gi - 1);
  }
  int free_node_gi(int k) const { return k % free_nx() + 1; }
  int free_node_gj(int k) const { return k / free_nx() + 1; }

  /// Coordinates of a free node by free-node index.
  double free_x1(int k) const { return node_x1(free_node_gi(k)); }
  double free_x2(int k) const { return node_x2(free_node_gj(k)); }

  bool valid() const { return nx >= 2 && ny >= 2 && dofs_per_node >= 1; }
};

}  // namespace ddrom
