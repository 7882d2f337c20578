#include "davieslab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace dlab {

int coord_dist(const Coord& a, const Coord& b, int dim, Metric metric) {
  int acc = 0;
  for (int j = 0; j < dim; ++j) {
    const int d = std::abs(a[j] - b[j]);
    if (metric == Metric::Chebyshev) {
      acc = std::max(acc, d);
    } else {
      acc += d;
    }
  }
  return acc;
}

Lattice Lattice::hypercube(int dimension, int half_side) {
  if (dimension < 1 || dimension > kMaxDim) throw DomainError("lattice dimension out of range");
  if (half_side < 0) throw DomainError("half side must be non-negative");
  Lattice lat = Lattice::box(std::vector<int>(dimension, 2 * half_side + 1));
  lat.half_side_ = half_side;
  for (int j = 0; j < dimension; ++j) lat.origin_[j] = -half_side;
  return lat;
}

Lattice Lattice::box(const std::vector<int>& sides) {
  if (sides.empty() || sides.size() > kMaxDim) throw DomainError("lattice dimension out of range");
  Lattice lat;
  lat.dimension_ = static_cast<int>(sides.size());
  lat.half_side_ = -1;
  lat.sides_ = sides;
  lat.origin_.assign(lat.dimension_, 0);
  lat.strides_.assign(lat.dimension_, 1);
  std::int64_t n = 1;
  for (int j = lat.dimension_ - 1; j >= 0; --j) {
    if (sides[j] < 1) throw DomainError("lattice side must be positive");
    lat.strides_[j] = n;
    n *= sides[j];
  }
  lat.num_sites_ = n;
  return lat;
}

Coord Lattice::coord(int site) const {
  Coord c{};
  std::int64_t rest = site;
  for (int j = 0; j < dimension_; ++j) {
    c[j] = static_cast<int>(rest / strides_[j]) + origin_[j];
    rest %= strides_[j];
  }
  return c;
}

int Lattice::site_of(const Coord& c) const {
  std::int64_t idx = 0;
  for (int j = 0; j < dimension_; ++j) {
    const int u = c[j] - origin_[j];
    if (u < 0 || u >= sides_[j]) return -1;
    idx += static_cast<std::int64_t>(u) * strides_[j];
  }
  return static_cast<int>(idx);
}

bool Lattice::contains(const Coord& c) const { return site_of(c) >= 0; }

int Lattice::dist(int a, int b, Metric metric) const {
  return coord_dist(coord(a), coord(b), dimension_, metric);
}

Region::Region(const Lattice* lattice, std::vector<int> sites) : lattice_(lattice) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  for (int s : sites) {
    if (s < 0 || s >= lattice->num_sites()) throw DomainError("region site outside lattice");
  }
  sites_ = std::move(sites);
}

Region Region::full(const Lattice& lattice) {
  std::vector<int> all(lattice.num_sites());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return Region(&lattice, std::move(all));
}

Region Region::empty(const Lattice& lattice) { return Region(&lattice, {}); }

Region Region::of_coords(const Lattice& lattice, const std::vector<std::vector<int>>& coords) {
  std::vector<int> sites;
  for (const auto& v : coords) {
    Coord c{};
    for (std::size_t j = 0; j < v.size(); ++j) c[j] = v[j];
    const int s = lattice.site_of(c);
    if (s < 0) throw DomainError("coordinate outside lattice");
    sites.push_back(s);
  }
  return Region(&lattice, std::move(sites));
}

bool Region::contains(int site) const {
  return std::binary_search(sites_.begin(), sites_.end(), site);
}

Region Region::unite(const Region& other) const {
  std::vector<int> out;
  out.reserve(sites_.size() + other.sites_.size());
  std::set_union(sites_.begin(), sites_.end(), other.sites_.begin(), other.sites_.end(),
                 std::back_inserter(out));
  Region r;
  r.lattice_ = lattice_ ? lattice_ : other.lattice_;
  r.sites_ = std::move(out);
  return r;
}

Region Region::intersect(const Region& other) const {
  std::vector<int> out;
  std::set_intersection(sites_.begin(), sites_.end(), other.sites_.begin(), other.sites_.end(),
                        std::back_inserter(out));
  Region r;
  r.lattice_ = lattice_;
  r.sites_ = std::move(out);
  return r;
}

Region Region::subtract(const Region& other) const {
  std::vector<int> out;
  std::set_difference(sites_.begin(), sites_.end(), other.sites_.begin(), other.sites_.end(),
                      std::back_inserter(out));
  Region r;
  r.lattice_ = lattice_;
  r.sites_ = std::move(out);
  return r;
}

Region Region::complement() const {
  std::vector<int> out;
  out.reserve(lattice_->num_sites() - sites_.size());
  std::size_t p = 0;
  for (int s = 0; s < lattice_->num_sites(); ++s) {
    if (p < sites_.size() && sites_[p] == s) {
      ++p;
    } else {
      out.push_back(s);
    }
  }
  Region r;
  r.lattice_ = lattice_;
  r.sites_ = std::move(out);
  return r;
}

bool Region::is_subset_of(const Region& other) const {
  return std::includes(other.sites_.begin(), other.sites_.end(), sites_.begin(), sites_.end());
}

bool Region::operator==(const Region& other) const { return sites_ == other.sites_; }

int Region::diameter(Metric metric) const {
  int best = 0;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    for (std::size_t j = i + 1; j < sites_.size(); ++j) {
      best = std::max(best, lattice_->dist(sites_[i], sites_[j], metric));
    }
  }
  return best;
}

std::string Region::to_string() const {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const Coord c = lattice_->coord(sites_[i]);
    if (i) os << ", ";
    os << "(";
    for (int j = 0; j < lattice_->dimension(); ++j) {
      if (j) os << ",";
      os << c[j];
    }
    os << ")";
  }
  os << "}";
  return os.str();
}

int region_distance(const Region& a, const Region& b, Metric metric) {
  if (a.is_empty() || b.is_empty()) throw DomainError("distance of empty region");
  const Lattice* lat = a.lattice();
  int best = std::numeric_limits<int>::max();
  for (int sa : a.sites()) {
    const Coord ca = lat->coord(sa);
    for (int sb : b.sites()) {
      best = std::min(best, coord_dist(ca, lat->coord(sb), lat->dimension(), metric));
      if (best == 0) return 0;
    }
  }
  return best;
}

Region metric_closure(const Region& r, int range, Metric metric) {
  const Lattice* lat = r.lattice();
  const int dim = lat->dimension();
  std::vector<int> out = r.sites();
  for (int s : r.sites()) {
    const Coord c = lat->coord(s);
    // scan the coordinate box of radius `range` around s
    std::vector<int> offs(dim, -range);
    while (true) {
      Coord q = c;
      for (int j = 0; j < dim; ++j) q[j] += offs[j];
      if (metric != Metric::L1 ||
          std::accumulate(offs.begin(), offs.end(), 0,
                          [](int acc, int v) { return acc + std::abs(v); }) <= range) {
        const int t = lat->site_of(q);
        if (t >= 0) out.push_back(t);
      }
      int j = dim - 1;
      while (j >= 0 && offs[j] == range) offs[j--] = -range;
      if (j < 0) break;
      ++offs[j];
    }
  }
  return Region(lat, std::move(out));
}

namespace {

using Mask = std::vector<std::uint8_t>;

Mask mask_of(const Region& r, std::int64_t n) {
  Mask m(n, 0);
  for (int s : r.sites()) m[s] = 1;
  return m;
}

Region region_of(const Lattice* lat, const Mask& m) {
  std::vector<int> sites;
  for (std::int64_t s = 0; s < static_cast<std::int64_t>(m.size()); ++s) {
    if (m[s]) sites.push_back(static_cast<int>(s));
  }
  return Region(lat, std::move(sites));
}

// Distance from site `s` to the nearest set site outside `cell` but inside
// `skeleton`, capped at `cap+1` (values above the cap are not distinguished).
int capped_dist_to(const Lattice& lat, int s, const Mask& skeleton, const Mask& cell, int cap) {
  const int dim = lat.dimension();
  const Coord c = lat.coord(s);
  for (int radius = 1; radius <= cap; ++radius) {
    std::vector<int> offs(dim, -radius);
    while (true) {
      bool on_shell = false;
      for (int j = 0; j < dim; ++j) {
        if (std::abs(offs[j]) == radius) on_shell = true;
      }
      if (on_shell) {
        Coord q = c;
        for (int j = 0; j < dim; ++j) q[j] += offs[j];
        const int t = lat.site_of(q);
        if (t >= 0 && skeleton[t] && !cell[t]) return radius;
      }
      int j = dim - 1;
      while (j >= 0 && offs[j] == radius) offs[j--] = -radius;
      if (j < 0) break;
      ++offs[j];
    }
  }
  return cap + 1;
}

// Components under axis adjacency by default; fattened cells of one level may
// touch diagonally without being the same cell. Level-0 crosses use the full
// Chebyshev neighbourhood so each junction cluster stays whole.
std::vector<Region> connected_components(const Lattice* lat, const Mask& m,
                                         bool chebyshev = false) {
  const int dim = lat->dimension();
  Mask seen(m.size(), 0);
  std::vector<Region> comps;
  for (std::int64_t start = 0; start < static_cast<std::int64_t>(m.size()); ++start) {
    if (!m[start] || seen[start]) continue;
    std::vector<int> sites;
    std::deque<int> queue{static_cast<int>(start)};
    seen[start] = 1;
    while (!queue.empty()) {
      const int s = queue.front();
      queue.pop_front();
      sites.push_back(s);
      const Coord c = lat->coord(s);
      auto visit = [&](const Coord& q) {
        const int t = lat->site_of(q);
        if (t >= 0 && m[t] && !seen[t]) {
          seen[t] = 1;
          queue.push_back(t);
        }
      };
      if (chebyshev) {
        std::vector<int> offs(dim, -1);
        while (true) {
          Coord q = c;
          for (int j = 0; j < dim; ++j) q[j] += offs[j];
          visit(q);
          int j = dim - 1;
          while (j >= 0 && offs[j] == 1) offs[j--] = -1;
          if (j < 0) break;
          ++offs[j];
        }
      } else {
        for (int j = 0; j < dim; ++j) {
          for (int dir : {-1, +1}) {
            Coord q = c;
            q[j] += dir;
            visit(q);
          }
        }
      }
    }
    comps.push_back(Region(lat, std::move(sites)));
  }
  return comps;
}

void fill_box(Cell& cell) {
  const Lattice* lat = cell.fattened.lattice();
  const int dim = lat->dimension();
  cell.box_lo.fill(0);
  cell.box_hi.fill(0);
  bool first = true;
  for (int s : cell.fattened.sites()) {
    const Coord c = lat->coord(s);
    for (int j = 0; j < dim; ++j) {
      if (first || c[j] < cell.box_lo[j]) cell.box_lo[j] = c[j];
      if (first || c[j] > cell.box_hi[j]) cell.box_hi[j] = c[j];
    }
    first = false;
  }
}

void sort_cells(std::vector<Cell>& cells) {
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return a.box_lo < b.box_lo || (a.box_lo == b.box_lo && a.box_hi < b.box_hi);
  });
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].index = static_cast<int>(i);
}

}  // namespace

Region CoarseGraining::aggregate_fattened(int a) const {
  Region r = Region::empty(*padded_);
  for (const Cell& cell : levels.at(a)) r = r.unite(cell.fattened);
  return r;
}

Region CoarseGraining::aggregate_buffered(int a) const {
  Region r = Region::empty(*padded_);
  for (const Cell& cell : levels.at(a)) r = r.unite(cell.buffered);
  return r;
}

Region CoarseGraining::aggregate_interior(int a) const {
  Region r = Region::empty(*padded_);
  for (const Cell& cell : levels.at(a)) r = r.unite(cell.interior);
  return r;
}

std::vector<Region> CoarseGraining::cover() const {
  std::vector<Region> out;
  for (const auto& lv : levels) {
    for (const Cell& cell : lv) {
      if (!cell.buffered.is_empty()) out.push_back(cell.buffered);
    }
  }
  return out;
}

CoarseGraining build_coarse_graining(const Lattice& lattice, int k, int c, int ell, int range) {
  const int dim = lattice.dimension();
  for (int j = 1; j < dim; ++j) {
    if (lattice.sides()[j] != lattice.sides()[0]) {
      throw ConfigError("coarse-graining requires equal side lengths");
    }
  }
  const int side = lattice.sides()[0];
  if (k < range) throw ConfigError("buffer violates k >= r");
  if (c < range) throw ConfigError("overlap violates c >= r");
  if (ell % 2 == 0) throw ConfigError("cell side violates l odd");
  if (ell <= 2 * dim * (k + c)) throw ConfigError("cell side violates l > 2D(k+c)");
  if (ell > side) throw ConfigError("cell side violates l <= side length");

  // Transparent padding to the smallest divisible (and, for canonical
  // hypercubes, odd) side.
  int padded_side = side;
  while (padded_side % ell != 0 ||
         (lattice.half_side() >= 0 && padded_side % 2 == 0)) {
    ++padded_side;
  }

  CoarseGraining cg;
  cg.k = k;
  cg.c = c;
  cg.ell = ell;
  const int pad_total = padded_side - side;
  const int pad_lo = pad_total / 2;
  if (lattice.half_side() >= 0 && pad_total > 0) {
    cg.padded_ = std::make_shared<Lattice>(Lattice::hypercube(dim, (padded_side - 1) / 2));
  } else if (lattice.half_side() >= 0) {
    cg.padded_ = std::make_shared<Lattice>(lattice);
  } else {
    cg.padded_ = std::make_shared<Lattice>(Lattice::box(std::vector<int>(dim, padded_side)));
  }
  const Lattice& lat = *cg.padded_;
  const std::int64_t n = lat.num_sites();

  {
    std::vector<int> orig;
    std::vector<int> pads;
    for (int s = 0; s < n; ++s) {
      Coord cd = lat.coord(s);
      bool inside = true;
      for (int j = 0; j < dim; ++j) {
        const int u = cd[j] - (lat.coord(0)[j]);  // offset within padded box
        if (u < pad_lo || u >= pad_lo + side) inside = false;
      }
      (inside ? orig : pads).push_back(s);
    }
    cg.original_image = Region(&lat, std::move(orig));
    cg.padded_sites = std::move(pads);
  }

  const int base0 = lat.coord(0)[0];
  auto block_of = [&](int u) { return (u - base0) / ell; };

  cg.levels.assign(dim + 1, {});
  cg.skeletons.assign(dim + 1, Region::empty(lat));
  cg.partitions.assign(dim + 1, LevelPartition{});

  // Level D: partition into l-blocks.
  {
    std::vector<std::vector<int>> block_sites(
        static_cast<std::size_t>(std::pow(padded_side / ell, dim)) + 1);
    const int blocks_per_axis = padded_side / ell;
    for (int s = 0; s < n; ++s) {
      const Coord cd = lat.coord(s);
      int id = 0;
      for (int j = 0; j < dim; ++j) id = id * blocks_per_axis + block_of(cd[j]);
      block_sites[id].push_back(s);
    }
    for (auto& sites : block_sites) {
      if (sites.empty()) continue;
      Cell cell;
      cell.level = dim;
      cell.fattened = Region(&lat, std::move(sites));
      fill_box(cell);
      cg.levels[dim].push_back(std::move(cell));
    }
    sort_cells(cg.levels[dim]);
  }
  cg.skeletons[dim] = Region::full(lat);

  // Peel levels D..1: trim each fattened cell against the skeleton, remove
  // the interiors, then find the next level's fattened cells as the axis
  // shadows of the just-removed interiors.
  for (int a = dim; a >= 1; --a) {
    Mask skel = mask_of(cg.skeletons[a], n);
    Mask removed(n, 0);
    for (Cell& cell : cg.levels[a]) {
      Mask cm = mask_of(cell.fattened, n);
      std::vector<int> buf, core;
      for (int s : cell.fattened.sites()) {
        const int d = capped_dist_to(lat, s, skel, cm, k + c);
        if (d > k) buf.push_back(s);
        // depth >= k+c keeps the interior-to-collar gap at exactly c
        if (d >= k + c) core.push_back(s);
      }
      cell.buffered = Region(&lat, std::move(buf));
      cell.interior = Region(&lat, std::move(core));
      for (int s : cell.interior.sites()) removed[s] = 1;
    }

    Mask next_skel = skel;
    for (std::int64_t s = 0; s < n; ++s) {
      if (removed[s]) next_skel[s] = 0;
    }
    cg.skeletons[a - 1] = region_of(&lat, next_skel);

    if (a - 1 >= 1) {
      // Axis shadows of the removed interiors: v is in the next level's
      // fattened set iff, along some axis, the line through v meets a
      // just-removed interior at matching transverse coordinates.
      std::vector<std::unordered_set<std::int64_t>> proj(dim);
      auto key_without_axis = [&](const Coord& cd, int axis) {
        std::int64_t key = 0;
        for (int j = 0; j < dim; ++j) {
          if (j == axis) continue;
          key = key * (2 * padded_side + 1) + (cd[j] - base0 + 1);
        }
        return key;
      };
      for (std::int64_t s = 0; s < n; ++s) {
        if (!removed[s]) continue;
        const Coord cd = lat.coord(static_cast<int>(s));
        for (int b = 0; b < dim; ++b) proj[b].insert(key_without_axis(cd, b));
      }
      Mask shadow(n, 0);
      for (std::int64_t s = 0; s < n; ++s) {
        if (!next_skel[s]) continue;
        const Coord cd = lat.coord(static_cast<int>(s));
        for (int b = 0; b < dim; ++b) {
          if (proj[b].count(key_without_axis(cd, b))) {
            shadow[s] = 1;
            break;
          }
        }
      }
      if (k >= 2) {
        // retreat k-1 layers from the remaining skeleton so that buffered
        // cells of perpendicular shadows stay 2k apart across junctions
        Mask shrunk = shadow;
        for (std::int64_t s = 0; s < n; ++s) {
          if (!shadow[s]) continue;
          if (capped_dist_to(lat, static_cast<int>(s), next_skel, shadow, k - 1) <= k - 1) {
            shrunk[s] = 0;
          }
        }
        shadow = std::move(shrunk);
      }
      for (Region& comp : connected_components(&lat, shadow)) {
        Cell cell;
        cell.level = a - 1;
        cell.fattened = std::move(comp);
        fill_box(cell);
        cg.levels[a - 1].push_back(std::move(cell));
      }
      sort_cells(cg.levels[a - 1]);
    }
  }

  // Level 0: whatever remains, split into components; no further trimming.
  {
    Mask rest = mask_of(cg.skeletons[0], n);
    cg.levels[0].clear();
    for (Region& comp : connected_components(&lat, rest, /*chebyshev=*/true)) {
      Cell cell;
      cell.level = 0;
      cell.fattened = comp;
      cell.buffered = comp;
      cell.interior = std::move(comp);
      fill_box(cell);
      cg.levels[0].push_back(std::move(cell));
    }
    sort_cells(cg.levels[0]);
  }

  for (int a = 1; a <= dim; ++a) {
    LevelPartition part;
    part.w = cg.skeletons[a].complement();
    part.x = cg.aggregate_interior(a);
    part.y = cg.aggregate_buffered(a).subtract(part.x);
    part.z = cg.skeletons[a].subtract(cg.aggregate_buffered(a));
    cg.partitions[a] = std::move(part);
  }
  return cg;
}

namespace {

void append_region_coords(std::ostringstream& os, const Region& r) {
  const Lattice* lat = r.lattice();
  os << "[";
  for (std::size_t i = 0; i < r.sites().size(); ++i) {
    const Coord c = lat->coord(r.sites()[i]);
    if (i) os << ",";
    os << "[";
    for (int j = 0; j < lat->dimension(); ++j) {
      if (j) os << ",";
      os << c[j];
    }
    os << "]";
  }
  os << "]";
}

}  // namespace

std::string CoarseGraining::to_json() const {
  const int dim = padded_->dimension();
  std::ostringstream os;
  os << "{\"k\":" << k << ",\"c\":" << c << ",\"ell\":" << ell << ",\"dimension\":" << dim
     << ",\"padded_side\":" << padded_->sides()[0] << ",\"padded_sites\":";
  append_region_coords(os, Region(padded_.get(), padded_sites));
  os << ",\"levels\":[";
  for (std::size_t a = 0; a < levels.size(); ++a) {
    if (a) os << ",";
    os << "[";
    for (std::size_t i = 0; i < levels[a].size(); ++i) {
      const Cell& cell = levels[a][i];
      if (i) os << ",";
      const int thin = 2 * (dim - static_cast<int>(a)) * (k + c);
      double tighter = 1.0;
      for (int j = 0; j < dim - static_cast<int>(a); ++j) tighter *= thin;
      for (int j = 0; j < static_cast<int>(a); ++j) tighter *= (ell - thin);
      os << "{\"level\":" << cell.level << ",\"index\":" << cell.index << ",\"size\":"
         << cell.fattened.size() << ",\"size_bound\":" << static_cast<long long>(std::pow(ell, dim))
         << ",\"tighter_size_bound\":" << tighter << ",\"fattened\":";
      append_region_coords(os, cell.fattened);
      os << ",\"buffered\":";
      append_region_coords(os, cell.buffered);
      os << ",\"interior\":";
      append_region_coords(os, cell.interior);
      os << "}";
    }
    os << "]";
  }
  os << "]}";
  return os.str();
}

std::string CoarseGraining::to_csv() const {
  const int dim = padded_->dimension();
  std::ostringstream os;
  for (int j = 0; j < dim; ++j) os << "x" << j << ",";
  os << "level,cell,role,padded\n";
  Mask padmask(padded_->num_sites(), 0);
  for (int s : padded_sites) padmask[s] = 1;
  auto emit = [&](const Region& r, int level, int index, const char* role) {
    for (int s : r.sites()) {
      const Coord cd = padded_->coord(s);
      for (int j = 0; j < dim; ++j) os << cd[j] << ",";
      os << level << "," << index << "," << role << "," << int(padmask[s]) << "\n";
    }
  };
  for (const auto& lv : levels) {
    for (const Cell& cell : lv) {
      emit(cell.interior, cell.level, cell.index, "interior");
      emit(cell.buffered.subtract(cell.interior), cell.level, cell.index, "collar");
      emit(cell.fattened.subtract(cell.buffered), cell.level, cell.index, "buffer");
    }
  }
  return os.str();
}

}  // namespace dlab
