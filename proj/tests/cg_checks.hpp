#pragma once

// Exhaustive verification of the coarse-graining properties, shared by the
// unit and acceptance suites. Returns human-readable violations; empty means
// every property holds.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "davieslab/lattice.hpp"

namespace dlab_test {

using namespace dlab;

inline int exact_set_distance(const Lattice& lat, const std::vector<int>& a,
                              const std::vector<int>& b) {
  int best = std::numeric_limits<int>::max();
  for (int sa : a) {
    const Coord ca = lat.coord(sa);
    for (int sb : b) {
      best = std::min(best, coord_dist(ca, lat.coord(sb), lat.dimension()));
      if (best == 0) return 0;
    }
  }
  return best;
}

// minimum distance from any site of x to the set z, capped at cap+1
inline int capped_min_distance(const Lattice& lat, const std::vector<int>& x,
                               const std::vector<std::uint8_t>& z_mask, int cap) {
  const int dim = lat.dimension();
  int best = cap + 1;
  for (int s : x) {
    const Coord c = lat.coord(s);
    for (int radius = 1; radius < best; ++radius) {
      bool hit = false;
      std::vector<int> offs(dim, -radius);
      while (true) {
        bool shell = false;
        for (int j = 0; j < dim; ++j) {
          if (std::abs(offs[j]) == radius) shell = true;
        }
        if (shell) {
          Coord q = c;
          for (int j = 0; j < dim; ++j) q[j] += offs[j];
          const int t = lat.site_of(q);
          if (t >= 0 && z_mask[t]) {
            hit = true;
            break;
          }
        }
        int j = dim - 1;
        while (j >= 0 && offs[j] == radius) offs[j--] = -radius;
        if (j < 0) break;
        ++offs[j];
      }
      if (hit) {
        best = radius;
        break;
      }
    }
    if (best == 1) break;
  }
  return best;
}

inline std::vector<std::string> verify_coarse_graining(const CoarseGraining& cg, int bigD, int k,
                                                       int c, int ell) {
  std::vector<std::string> bad;
  auto fail = [&](const std::string& what) { bad.push_back(what); };
  const Lattice& lat = cg.padded_lattice();
  const std::int64_t n = lat.num_sites();
  const double ell_pow = std::pow(static_cast<double>(ell), bigD);

  // property 1: same-level disjointness and nested size bounds
  for (int a = 0; a <= bigD; ++a) {
    std::vector<int> count(n, 0);
    for (const Cell& cell : cg.level(a)) {
      if (!cell.interior.is_subset_of(cell.buffered) ||
          !cell.buffered.is_subset_of(cell.fattened)) {
        fail("p1: cell nesting broken at level " + std::to_string(a));
      }
      if (!(static_cast<double>(cell.fattened.size()) <= ell_pow)) {
        fail("p1: fattened cell exceeds l^D at level " + std::to_string(a));
      }
      for (int s : cell.fattened.sites()) {
        if (count[s]++) fail("p1: overlapping fattened cells at level " + std::to_string(a));
      }
    }
  }

  // property 2: level-0 structure
  {
    Region agg = Region::empty(lat);
    for (const Cell& cell : cg.level(0)) {
      if (!(cell.interior == cell.buffered) || !(cell.buffered == cell.fattened)) {
        fail("p2: level-0 cell rings differ");
      }
      for (int j = 0; j < lat.dimension(); ++j) {
        if (cell.box_hi[j] - cell.box_lo[j] + 1 > 2 * bigD * (k + c)) {
          fail("p2: level-0 cell leaves the 2D(k+c) hypercube");
        }
      }
      agg = agg.unite(cell.fattened);
    }
    if (!(agg == cg.skeletons[0])) fail("p2: level-0 cells do not tile C^0");
    const auto& cells = cg.level(0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      for (std::size_t j = i + 1; j < cells.size(); ++j) {
        int box_gap = std::numeric_limits<int>::max();
        // box distance lower-bounds the set distance
        int per_axis = 0;
        for (int ax = 0; ax < lat.dimension(); ++ax) {
          const int lo = std::max(cells[i].box_lo[ax], cells[j].box_lo[ax]);
          const int hi = std::min(cells[i].box_hi[ax], cells[j].box_hi[ax]);
          per_axis = std::max(per_axis, lo - hi);
        }
        box_gap = per_axis;
        const int need = ell - 2 * bigD * (k + c);
        if (box_gap < need &&
            exact_set_distance(lat, cells[i].fattened.sites(), cells[j].fattened.sites()) < need) {
          fail("p2: level-0 cells closer than l-2D(k+c)");
        }
      }
    }
  }

  // property 3: covering and multiplicity
  {
    std::vector<int> mult(n, 0);
    for (int a = 0; a <= bigD; ++a) {
      for (const Cell& cell : cg.level(a)) {
        for (int s : cell.buffered.sites()) ++mult[s];
      }
    }
    for (std::int64_t s = 0; s < n; ++s) {
      if (mult[s] == 0) fail("p3: site uncovered");
      if (mult[s] > bigD + 1) fail("p3: multiplicity exceeds D+1");
    }
  }

  // property 4 and the partition identity
  for (int a = 1; a <= bigD; ++a) {
    const Region& skel = cg.skeletons[a];
    const Region interior = cg.aggregate_interior(a);
    if (!(interior == skel.subtract(cg.skeletons[a - 1]))) {
      fail("p4: interior != C^a minus C^{a-1} at level " + std::to_string(a));
    }
    const LevelPartition& part = cg.partitions[a];
    if (!(part.x == interior)) fail("partition: X != interior at level " + std::to_string(a));
    Region rebuilt = part.w.unite(part.x).unite(part.y).unite(part.z);
    if (!(rebuilt == Region::full(lat)) ||
        part.w.size() + part.x.size() + part.y.size() + part.z.size() !=
            static_cast<std::size_t>(n)) {
      fail("partition: W|X|Y|Z is not a partition at level " + std::to_string(a));
    }
    if (!part.x.is_empty() && !part.z.is_empty()) {
      std::vector<std::uint8_t> zmask(n, 0);
      for (int s : part.z.sites()) zmask[s] = 1;
      const int dist = capped_min_distance(lat, part.x.sites(), zmask, c + 1);
      if (dist != c) {
        fail("p4: dist(X,Z) = " + std::to_string(dist) + " != c at level " + std::to_string(a));
      }
    }
  }

  // property 5: buffered cells of a level keep distance >= 2k
  for (int a = 0; a <= bigD; ++a) {
    const auto& cells = cg.level(a);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].buffered.is_empty()) continue;
      for (std::size_t j = i + 1; j < cells.size(); ++j) {
        if (cells[j].buffered.is_empty()) continue;
        int per_axis = 0;
        for (int ax = 0; ax < lat.dimension(); ++ax) {
          const int lo = std::max(cells[i].box_lo[ax], cells[j].box_lo[ax]);
          const int hi = std::min(cells[i].box_hi[ax], cells[j].box_hi[ax]);
          per_axis = std::max(per_axis, lo - hi);
        }
        if (per_axis >= 2 * k) continue;
        if (exact_set_distance(lat, cells[i].buffered.sites(), cells[j].buffered.sites()) <
            2 * k) {
          fail("p5: buffered cells closer than 2k at level " + std::to_string(a));
        }
      }
    }
  }
  return bad;
}

}  // namespace dlab_test
