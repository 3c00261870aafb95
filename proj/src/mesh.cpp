#include "evi/mesh.hpp"

#include <cmath>
#include <string>

#include "evi/error.hpp"

namespace evi {

double domain_area(Domain d) { return d == Domain::UnitSquare ? 1.0 : 3.0; }
double domain_perimeter(Domain d) { return d == Domain::UnitSquare ? 4.0 : 8.0; }

double Mesh::tri_area(int t) const {
  const auto& tri = triangles[t];
  const auto& a = nodes[tri[0]];
  const auto& b = nodes[tri[1]];
  const auto& c = nodes[tri[2]];
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

std::vector<int> Mesh::interior_nodes() const {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (int k = 0; k < node_count(); ++k)
    if (!boundary_mask[k]) out.push_back(k);
  return out;
}

namespace {

// A lattice point is part of the LShape iff not strictly inside the removed
// quadrant {x > 0, y < 0}.  Lattice coordinates are integers, so the test is
// exact.
bool lshape_keep_node(int i, int j, int half) { return !(i > half && j < half); }

// Cell (i,j) spans [i,i+1]x[j,j+1] in lattice units.
bool lshape_keep_cell(int i, int j, int half) { return !(i >= half && j + 1 <= half); }

void append_boundary_walk(const Mesh& m, std::vector<int>& loop,
                          const std::vector<std::array<int, 2>>& corners) {
  const std::size_t n = corners.size();
  for (std::size_t s = 0; s < n; ++s) {
    const auto& a = corners[s];
    const auto& b = corners[(s + 1) % n];
    const int di = (b[0] > a[0]) - (b[0] < a[0]);
    const int dj = (b[1] > a[1]) - (b[1] < a[1]);
    int i = a[0], j = a[1];
    while (i != b[0] || j != b[1]) {  // segment end is the next segment's start
      loop.push_back(m.node_at(i, j));
      i += di;
      j += dj;
    }
  }
}

}  // namespace

Mesh build_mesh(Domain domain, int level) {
  if (level < 0 || level > 10)
    throw BoundsError("build_mesh: level " + std::to_string(level) + " outside [0, 10]");

  Mesh m;
  m.domain = domain;
  m.level = level;
  m.h = std::ldexp(1.0, -(level + 1));
  if (domain == Domain::UnitSquare) {
    m.x0 = m.y0 = 0.0;
    m.cells = 1 << (level + 1);
  } else {
    m.x0 = m.y0 = -1.0;
    m.cells = 1 << (level + 2);
  }
  const int n = m.cells;
  const int half = n / 2;  // lattice index of x=0 / y=0 on the LShape

  m.lattice_to_node.assign(static_cast<std::size_t>(n + 1) * (n + 1), -1);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      if (domain == Domain::LShape && !lshape_keep_node(i, j, half)) continue;
      m.lattice_to_node[static_cast<std::size_t>(j) * (n + 1) + i] = m.node_count();
      m.nodes.push_back({m.x0 + i * m.h, m.y0 + j * m.h});
      m.node_lattice.push_back({i, j});
    }
  }

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (domain == Domain::LShape && !lshape_keep_cell(i, j, half)) continue;
      const int bl = m.node_at(i, j);
      const int br = m.node_at(i + 1, j);
      const int tr = m.node_at(i + 1, j + 1);
      const int tl = m.node_at(i, j + 1);
      m.triangles.push_back({bl, br, tr});
      m.triangles.push_back({bl, tr, tl});
    }
  }

  m.boundary_mask.assign(m.nodes.size(), 0);
  for (int k = 0; k < m.node_count(); ++k) {
    const int i = m.node_lattice[k][0];
    const int j = m.node_lattice[k][1];
    bool on = (i == 0 || i == n || j == 0 || j == n);
    if (domain == Domain::LShape && !on)
      on = (j == half && i >= half) || (i == half && j <= half);
    m.boundary_mask[k] = on ? 1 : 0;
  }

  if (domain == Domain::UnitSquare) {
    append_boundary_walk(m, m.boundary_loop,
                         {{0, 0}, {n, 0}, {n, n}, {0, n}});
  } else {
    append_boundary_walk(m, m.boundary_loop,
                         {{0, 0}, {half, 0}, {half, half}, {n, half}, {n, n}, {0, n}});
  }
  return m;
}

std::vector<int> boundary_nodes(const Mesh& mesh) { return mesh.boundary_loop; }

}  // namespace evi
