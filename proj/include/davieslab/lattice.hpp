#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "davieslab/errors.hpp"

namespace dlab {

constexpr int kMaxDim = 4;
using Coord = std::array<int, kMaxDim>;

enum class Metric { Chebyshev, L1 };

int coord_dist(const Coord& a, const Coord& b, int dim, Metric metric = Metric::Chebyshev);

// Finite hypercubic lattice. The canonical form is [-L, L]^D with odd side
// 2L+1; a general box with given sides per axis is also supported (the
// canonical constructor reduces to it internally). Site order is
// lexicographic and stable; all region algebra works on site indices.
class Lattice {
 public:
  static Lattice hypercube(int dimension, int half_side);      // [-L, L]^D
  static Lattice box(const std::vector<int>& sides_per_axis);  // origin at 0

  int dimension() const { return dimension_; }
  // Half side L for odd hypercubes; -1 for general boxes.
  int half_side() const { return half_side_; }
  const std::vector<int>& sides() const { return sides_; }
  std::int64_t num_sites() const { return num_sites_; }

  Coord coord(int site) const;
  int site_of(const Coord& c) const;  // -1 if outside
  bool contains(const Coord& c) const;

  int dist(int site_a, int site_b, Metric metric = Metric::Chebyshev) const;

  bool operator==(const Lattice& other) const {
    return dimension_ == other.dimension_ && sides_ == other.sides_ && origin_ == other.origin_;
  }

 private:
  int dimension_ = 1;
  int half_side_ = -1;
  std::vector<int> sides_;
  std::vector<std::int64_t> strides_;
  std::vector<int> origin_;  // coordinate of site 0 along each axis
  std::int64_t num_sites_ = 0;
};

// Site set on a lattice; stored as sorted unique indices. Does not own the
// lattice; callers keep it alive.
class Region {
 public:
  Region() = default;
  Region(const Lattice* lattice, std::vector<int> sites);
  static Region full(const Lattice& lattice);
  static Region empty(const Lattice& lattice);
  static Region of_coords(const Lattice& lattice, const std::vector<std::vector<int>>& coords);

  const Lattice* lattice() const { return lattice_; }
  const std::vector<int>& sites() const { return sites_; }
  std::size_t size() const { return sites_.size(); }
  bool is_empty() const { return sites_.empty(); }
  bool contains(int site) const;

  Region unite(const Region& other) const;
  Region intersect(const Region& other) const;
  Region subtract(const Region& other) const;
  Region complement() const;
  bool is_subset_of(const Region& other) const;
  bool operator==(const Region& other) const;

  int diameter(Metric metric = Metric::Chebyshev) const;  // 0 for singletons/empty

  std::string to_string() const;

 private:
  const Lattice* lattice_ = nullptr;
  std::vector<int> sites_;
};

// Minimum pairwise coordinate distance between two regions; DomainError on
// empty input.
int region_distance(const Region& a, const Region& b, Metric metric = Metric::Chebyshev);

// R together with all sites within range r of it (metric ball closure).
Region metric_closure(const Region& r, int range, Metric metric = Metric::Chebyshev);

struct Cell {
  int level = 0;
  int index = 0;             // position within its level, lexicographic by min corner
  Region fattened;           // C^partial
  Region buffered;           // C
  Region interior;           // ring interior; equals buffered at level 0
  Coord box_lo{}, box_hi{};  // bounding box of the fattened cell
};

struct LevelPartition {
  Region w;  // complement of the level skeleton
  Region x;  // union of the level's cell interiors
  Region y;  // collar, C_a minus interiors
  Region z;  // skeleton minus C_a
};

// Leveled overlapping decomposition with cell side l, buffer k, overlap c.
// When l does not divide the side length the lattice is transparently padded
// to the smallest larger divisible size and the padded sites are marked;
// downstream operators treat them as free sites.
class CoarseGraining {
 public:
  int k = 0, c = 0, ell = 0;

  const Lattice& padded_lattice() const { return *padded_; }
  std::shared_ptr<const Lattice> padded_lattice_ptr() const { return padded_; }

  std::vector<int> padded_sites;           // indices into the padded lattice, sorted
  Region original_image;                   // image of the original lattice
  std::vector<std::vector<Cell>> levels;   // levels[a], a in [0, D]
  std::vector<Region> skeletons;           // skeletons[a] = C^a
  std::vector<LevelPartition> partitions;  // valid for a in [1, D]; [0] unused

  const std::vector<Cell>& level(int a) const { return levels.at(a); }
  Region aggregate_fattened(int a) const;
  Region aggregate_buffered(int a) const;
  Region aggregate_interior(int a) const;

  // All buffered cells across levels: the cover used by the tensorization
  // and transport checks.
  std::vector<Region> cover() const;

  std::string to_json() const;
  std::string to_csv() const;  // coords,level,cell,role,padded rows

  std::shared_ptr<const Lattice> padded_;
};

// Validity gate: k, c >= r, l odd, l > 2 D (k + c), l <= side length.
// Throws ConfigError naming the violated inequality.
CoarseGraining build_coarse_graining(const Lattice& lattice, int k, int c, int ell,
                                     int interaction_range = 1);

}  // namespace dlab
