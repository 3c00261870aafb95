#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace evi {

/// Computational domains used by the problem library.
/// UnitSquare = (0,1)^2.  LShape = (-1,1)^2 \ [0,1]x[-1,0], with the
/// re-entrant corner at the origin; the two edges {(x,0): 0<=x<=1} and
/// {(0,y): -1<=y<=0} belong to the boundary.
enum class Domain { UnitSquare, LShape };

double domain_area(Domain d);       // 1 or 3
double domain_perimeter(Domain d);  // 4 or 8

/// Structured conforming triangulation on a uniform lattice of spacing
/// h = 2^-(level+1).  Every grid cell is split along its bottom-left to
/// top-right diagonal, so meshes of consecutive levels are nested.
struct Mesh {
  Domain domain = Domain::UnitSquare;
  int level = 0;
  double h = 0.5;       // lattice spacing
  double x0 = 0.0;      // lattice origin
  double y0 = 0.0;
  int cells = 0;        // lattice cells per side

  std::vector<std::array<double, 2>> nodes;
  std::vector<std::array<int, 3>> triangles;        // CCW node triples
  std::vector<std::uint8_t> boundary_mask;          // per node
  std::vector<std::array<int, 2>> node_lattice;     // node -> (i,j)
  std::vector<int> lattice_to_node;                 // (i,j) -> node or -1
  std::vector<int> boundary_loop;                   // CCW walk of the boundary

  int node_count() const { return static_cast<int>(nodes.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  int boundary_count() const { return static_cast<int>(boundary_loop.size()); }
  int interior_count() const { return node_count() - boundary_count(); }

  int node_at(int i, int j) const {
    if (i < 0 || j < 0 || i > cells || j > cells) return -1;
    return lattice_to_node[static_cast<std::size_t>(j) * (cells + 1) + i];
  }

  double tri_area(int t) const;

  /// Interior node indices in ascending node order.
  std::vector<int> interior_nodes() const;
};

/// Build the level-`level` mesh of `domain`.  level must lie in [0, 10].
Mesh build_mesh(Domain domain, int level);

/// Boundary node indices ordered by a fixed counter-clockwise traversal
/// of the boundary polygon.
std::vector<int> boundary_nodes(const Mesh& mesh);

}  // namespace evi
