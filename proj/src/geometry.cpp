#include "sparsefield/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace sparsefield {

Location::Location(std::initializer_list<double> coords) {
  if (coords.size() == 0 || coords.size() > kMaxDim) {
    throw PreconditionError("Location: dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  dim = static_cast<int>(coords.size());
  std::copy(coords.begin(), coords.end(), x.begin());
}

bool operator==(const Location& a, const Location& b) {
  if (a.dim != b.dim) return false;
  for (int k = 0; k < a.dim; ++k) {
    if (a.x[k] != b.x[k]) return false;
  }
  return true;
}

double distance(const Location& a, const Location& b) { return std::sqrt(squared_distance(a, b)); }

Domain::Domain(Location lo, Location hi) : lower(lo), upper(hi) {
  if (lo.dim != hi.dim) throw PreconditionError("Domain: corner dimensions differ");
  for (int k = 0; k < lo.dim; ++k) {
    if (!std::isfinite(lo[k]) || !std::isfinite(hi[k]) || !(lo[k] < hi[k])) {
      throw PreconditionError("Domain: require finite lower < upper on every axis");
    }
  }
}

bool Domain::contains(const Location& u) const {
  if (u.dim != dim()) return false;
  for (int k = 0; k < dim(); ++k) {
    if (u[k] < lower[k] || u[k] > upper[k]) return false;
  }
  return true;
}

double Domain::diameter() const { return distance(lower, upper); }

double volume(const Domain& domain) {
  double v = 1.0;
  for (int k = 0; k < domain.dim(); ++k) v *= domain.upper[k] - domain.lower[k];
  return v;
}

namespace {

std::size_t checked_product(std::span<const int> counts, int dim) {
  if (static_cast<int>(counts.size()) != dim) {
    throw PreconditionError("grid counts must have one entry per axis");
  }
  std::size_t total = 1;
  for (int c : counts) {
    if (c < 1) throw PreconditionError("grid counts must be >= 1");
    total *= static_cast<std::size_t>(c);
    if (total > kGridCap) throw PreconditionError("grid exceeds the configured point cap");
  }
  return total;
}

// Visits every multi-index of a box with axis 0 varying fastest.
template <typename F>
void for_each_index(std::span<const int> extent, F&& f) {
  const int dim = static_cast<int>(extent.size());
  std::array<int, kMaxDim> idx{};
  while (true) {
    f(idx);
    int axis = 0;
    while (axis < dim && ++idx[axis] == extent[axis]) {
      idx[axis] = 0;
      ++axis;
    }
    if (axis == dim) return;
  }
}

}  // namespace

LocationList regular_grid(const Domain& domain, std::span<const int> counts, GridStyle style) {
  const int dim = domain.dim();
  const std::size_t total = checked_product(counts, dim);
  LocationList out;
  out.reserve(total);
  for_each_index(counts, [&](const std::array<int, kMaxDim>& idx) {
    Location u;
    u.dim = dim;
    for (int a = 0; a < dim; ++a) {
      const double lo = domain.lower[a];
      const double len = domain.upper[a] - lo;
      if (style == GridStyle::kCellCentered) {
        u[a] = lo + len * (idx[a] + 0.5) / counts[a];
      } else if (counts[a] == 1) {
        u[a] = lo + 0.5 * len;
      } else {
        u[a] = idx[a] + 1 == counts[a] ? domain.upper[a]
                                       : lo + len * static_cast<double>(idx[a]) / (counts[a] - 1);
      }
    }
    out.push_back(u);
  });
  return out;
}

std::size_t GridSchedule::size() const {
  std::size_t total = 1;
  for (int a = 0; a < domain.dim(); ++a) total *= static_cast<std::size_t>(intervals(a)) + 1;
  return total;
}

std::vector<std::array<std::int64_t, kMaxDim>> GridSchedule::lattice() const {
  const int dim = domain.dim();
  std::vector<int> extent(dim);
  for (int a = 0; a < dim; ++a) extent[a] = intervals(a) + 1;
  std::vector<std::array<std::int64_t, kMaxDim>> out;
  out.reserve(size());
  for_each_index(extent, [&](const std::array<int, kMaxDim>& idx) {
    std::array<std::int64_t, kMaxDim> p{};
    for (int a = 0; a < dim; ++a) p[a] = idx[a];
    out.push_back(p);
  });
  return out;
}

LocationList GridSchedule::locations() const {
  const int dim = domain.dim();
  LocationList out;
  out.reserve(size());
  for (const auto& p : lattice()) {
    Location u;
    u.dim = dim;
    for (int a = 0; a < dim; ++a) {
      const std::int64_t n = intervals(a);
      // Exact rational k/n; identical for (2k)/(2n) so levels nest exactly.
      const double q = static_cast<double>(p[a]) / static_cast<double>(n);
      u[a] = p[a] == n ? domain.upper[a]
                       : domain.lower[a] + (domain.upper[a] - domain.lower[a]) * q;
    }
    out.push_back(u);
  }
  return out;
}

std::vector<std::size_t> GridSchedule::indices_in_refined() const {
  const int dim = domain.dim();
  std::vector<std::size_t> out;
  out.reserve(size());
  for (const auto& p : lattice()) {
    std::size_t flat = 0;
    std::size_t stride = 1;
    for (int a = 0; a < dim; ++a) {
      flat += static_cast<std::size_t>(2 * p[a]) * stride;
      stride *= static_cast<std::size_t>(2 * intervals(a)) + 1;
    }
    out.push_back(flat);
  }
  return out;
}

GridSchedule refine(const GridSchedule& schedule) {
  GridSchedule next = schedule;
  ++next.level;
  if (next.size() > kGridCap) throw PreconditionError("refine: grid exceeds the configured point cap");
  return next;
}

LocationList uniform_locations(const Domain& domain, std::size_t count, StreamKey key) {
  if (count == 0) throw PreconditionError("uniform_locations: count must be >= 1");
  RandomStream stream(key);
  LocationList out(count);
  for (auto& u : out) {
    u.dim = domain.dim();
    for (int a = 0; a < domain.dim(); ++a) {
      u[a] = domain.lower[a] + (domain.upper[a] - domain.lower[a]) * stream.uniform();
    }
  }
  return out;
}

namespace {

struct Candidate {
  double d2;
  int index;
  friend bool operator<(const Candidate& a, const Candidate& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
  }
};

std::vector<int> take_indices(std::vector<Candidate>& c, int m) {
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(m, 0)), c.size());
  std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(keep), c.end());
  std::vector<int> out(keep);
  for (std::size_t i = 0; i < keep; ++i) out[i] = c[i].index;
  return out;
}

}  // namespace

std::vector<int> nearest_neighbors(const Location& query, std::span<const Location> candidates,
                                   int m) {
  return nearest_neighbors(query, candidates, m, candidates.size());
}

std::vector<int> nearest_neighbors(const Location& query, std::span<const Location> candidates,
                                   int m, std::size_t limit) {
  const std::size_t n = std::min(limit, candidates.size());
  std::vector<Candidate> c(n);
  for (std::size_t j = 0; j < n; ++j) {
    c[j] = {squared_distance(query, candidates[j]), static_cast<int>(j)};
  }
  return take_indices(c, m);
}

std::vector<int> radius_neighbors(const Location& query, std::span<const Location> candidates,
                                  double radius) {
  return radius_neighbors(query, candidates, radius, candidates.size());
}

std::vector<int> radius_neighbors(const Location& query, std::span<const Location> candidates,
                                  double radius, std::size_t limit) {
  if (!(radius > 0.0)) throw PreconditionError("radius_neighbors: radius must be positive");
  const double r2 = radius * radius;
  const std::size_t n = std::min(limit, candidates.size());
  std::vector<int> out;
  for (std::size_t j = 0; j < n; ++j) {
    if (squared_distance(query, candidates[j]) < r2) out.push_back(static_cast<int>(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// NeighborIndex

NeighborIndex::NeighborIndex(LocationList candidates) : points_(std::move(candidates)) {
  if (points_.empty()) throw PreconditionError("NeighborIndex: empty candidate set");
  dim_ = points_.front().dim;
  if (!use_buckets()) return;

  std::array<double, kMaxDim> hi{};
  for (int a = 0; a < dim_; ++a) {
    origin_[a] = std::numeric_limits<double>::infinity();
    hi[a] = -std::numeric_limits<double>::infinity();
  }
  for (const auto& p : points_) {
    for (int a = 0; a < dim_; ++a) {
      origin_[a] = std::min(origin_[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  // About four points per bucket.
  const double per_axis = std::pow(static_cast<double>(points_.size()) / 4.0, 1.0 / dim_);
  std::size_t total = 1;
  for (int a = 0; a < dim_; ++a) {
    const double extent = hi[a] - origin_[a];
    cells_[a] = extent > 0.0 ? std::max(1, static_cast<int>(per_axis)) : 1;
    width_[a] = extent > 0.0 ? extent / cells_[a] : 1.0;
    total *= static_cast<std::size_t>(cells_[a]);
  }

  std::vector<std::size_t> bucket(points_.size());
  bucket_start_.assign(total + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    bucket[i] = flat(cell_of(points_[i]));
    ++bucket_start_[bucket[i] + 1];
  }
  std::partial_sum(bucket_start_.begin(), bucket_start_.end(), bucket_start_.begin());
  bucket_items_.resize(points_.size());
  std::vector<std::size_t> fill(bucket_start_.begin(), bucket_start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    bucket_items_[fill[bucket[i]]++] = static_cast<int>(i);
  }
}

std::array<int, kMaxDim> NeighborIndex::cell_of(const Location& u) const {
  std::array<int, kMaxDim> cell{};
  for (int a = 0; a < dim_; ++a) {
    const double t = std::floor((u[a] - origin_[a]) / width_[a]);
    cell[a] = static_cast<int>(std::clamp(t, 0.0, static_cast<double>(cells_[a] - 1)));
  }
  return cell;
}

std::size_t NeighborIndex::flat(const std::array<int, kMaxDim>& cell) const {
  std::size_t f = 0;
  std::size_t stride = 1;
  for (int a = 0; a < dim_; ++a) {
    f += static_cast<std::size_t>(cell[a]) * stride;
    stride *= static_cast<std::size_t>(cells_[a]);
  }
  return f;
}

template <typename Visit>
void NeighborIndex::visit_box(const std::array<int, kMaxDim>& lo,
                              const std::array<int, kMaxDim>& hi, Visit&& visit) const {
  std::array<int, kMaxDim> extent{};
  for (int a = 0; a < dim_; ++a) extent[a] = hi[a] - lo[a] + 1;
  for_each_index(std::span<const int>(extent.data(), dim_), [&](const std::array<int, kMaxDim>& off) {
    std::array<int, kMaxDim> cell{};
    for (int a = 0; a < dim_; ++a) cell[a] = lo[a] + off[a];
    visit(cell);
  });
}

std::vector<int> NeighborIndex::nearest(const Location& query, int m) const {
  return nearest(query, m, points_.size());
}

std::vector<int> NeighborIndex::nearest(const Location& query, int m, std::size_t limit) const {
  const std::size_t available = std::min(limit, points_.size());
  if (!use_buckets() || available <= kBruteForceThreshold) {
    return nearest_neighbors(query, points_, m, limit);
  }
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(std::max(m, 0)), available);
  if (want == 0) return {};

  // Ring-by-ring expansion around the query's (clamped) bucket.  After ring
  // R every unvisited point is at least `bound` away; stop once the current
  // m-th best is strictly closer than that, so ties cannot be missed.
  const auto centre = cell_of(query);
  std::vector<Candidate> best;
  best.reserve(want + 64);
  auto worst = [&] {
    return std::max_element(best.begin(), best.end())->d2;
  };
  int max_ring = 0;
  for (int a = 0; a < dim_; ++a) {
    max_ring = std::max({max_ring, centre[a], cells_[a] - 1 - centre[a]});
  }
  for (int ring = 0; ring <= max_ring; ++ring) {
    std::array<int, kMaxDim> lo{}, hi{};
    for (int a = 0; a < dim_; ++a) {
      lo[a] = std::max(0, centre[a] - ring);
      hi[a] = std::min(cells_[a] - 1, centre[a] + ring);
    }
    visit_box(lo, hi, [&](const std::array<int, kMaxDim>& cell) {
      int cheb = 0;
      for (int a = 0; a < dim_; ++a) cheb = std::max(cheb, std::abs(cell[a] - centre[a]));
      if (cheb != ring) return;
      const std::size_t b = flat(cell);
      for (std::size_t k = bucket_start_[b]; k < bucket_start_[b + 1]; ++k) {
        const int j = bucket_items_[k];
        if (static_cast<std::size_t>(j) >= limit) continue;
        best.push_back({squared_distance(query, points_[j]), j});
      }
    });
    if (best.size() > 4 * want + 64) {
      std::nth_element(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(want - 1), best.end());
      best.resize(want);
    }
    if (best.size() < want) continue;

    double bound = std::numeric_limits<double>::infinity();
    for (int a = 0; a < dim_; ++a) {
      if (centre[a] - ring > 0) {
        bound = std::min(bound, query[a] - (origin_[a] + (centre[a] - ring) * width_[a]));
      }
      if (centre[a] + ring < cells_[a] - 1) {
        bound = std::min(bound, origin_[a] + (centre[a] + ring + 1) * width_[a] - query[a]);
      }
    }
    if (bound == std::numeric_limits<double>::infinity()) break;
    if (bound > 0.0 && bound * bound > worst()) break;
  }
  return take_indices(best, static_cast<int>(want));
}

std::vector<int> NeighborIndex::within(const Location& query, double radius) const {
  return within(query, radius, points_.size());
}

std::vector<int> NeighborIndex::within(const Location& query, double radius,
                                       std::size_t limit) const {
  if (!use_buckets()) return radius_neighbors(query, points_, radius, limit);
  if (!(radius > 0.0)) throw PreconditionError("radius_neighbors: radius must be positive");
  const double r2 = radius * radius;
  std::array<int, kMaxDim> lo{}, hi{};
  for (int a = 0; a < dim_; ++a) {
    const double tlo = std::floor((query[a] - radius - origin_[a]) / width_[a]);
    const double thi = std::floor((query[a] + radius - origin_[a]) / width_[a]);
    lo[a] = static_cast<int>(std::clamp(tlo, 0.0, static_cast<double>(cells_[a] - 1)));
    hi[a] = static_cast<int>(std::clamp(thi, 0.0, static_cast<double>(cells_[a] - 1)));
  }
  std::vector<int> out;
  visit_box(lo, hi, [&](const std::array<int, kMaxDim>& cell) {
    const std::size_t b = flat(cell);
    for (std::size_t k = bucket_start_[b]; k < bucket_start_[b + 1]; ++k) {
      const int j = bucket_items_[k];
      if (static_cast<std::size_t>(j) < limit && squared_distance(query, points_[j]) < r2) {
        out.push_back(j);
      }
    }
  });
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Partitions

std::array<int, kMaxDim> Partition::unflatten(std::size_t cell) const {
  std::array<int, kMaxDim> idx{};
  for (int a = 0; a < domain.dim(); ++a) {
    const auto n = static_cast<std::size_t>(cells_along(a));
    idx[a] = static_cast<int>(cell % n);
    cell /= n;
  }
  return idx;
}

Partition make_partition(const Domain& domain, std::span<const int> counts,
                         std::span<const double> offset) {
  const int dim = domain.dim();
  checked_product(counts, dim);
  if (!offset.empty() && static_cast<int>(offset.size()) != dim) {
    throw PreconditionError("make_partition: offset must have one entry per axis");
  }
  Partition p{domain, {counts.begin(), counts.end()}, {}, {}, {}, 0, {}};
  p.cell_count = 1;
  for (int a = 0; a < dim; ++a) {
    const double lo = domain.lower[a];
    const double hi = domain.upper[a];
    const double side = (hi - lo) / counts[a];
    double shift = offset.empty() ? 0.0 : offset[a];
    if (!(std::abs(shift) < side)) {
      throw PreconditionError("make_partition: |offset| must be smaller than the cell side");
    }
    if (shift < 0.0) shift += side;
    p.side.push_back(side);
    p.offset.push_back(shift);

    std::vector<double> e{lo};
    for (int k = 0;; ++k) {
      const double b = lo + shift + side * k;
      if (k == 0 && shift == 0.0) continue;
      if (b >= hi) break;
      e.push_back(b);
    }
    e.push_back(hi);
    p.cell_count *= e.size() - 1;
    p.edges.push_back(std::move(e));
  }
  p.centroids.reserve(p.cell_count);
  for (std::size_t c = 0; c < p.cell_count; ++c) {
    const auto idx = p.unflatten(c);
    Location u;
    u.dim = dim;
    for (int a = 0; a < dim; ++a) u[a] = 0.5 * (p.edges[a][idx[a]] + p.edges[a][idx[a] + 1]);
    p.centroids.push_back(u);
  }
  return p;
}

std::size_t locate_cell(const Partition& partition, const Location& u) {
  if (!partition.domain.contains(u)) throw PreconditionError("locate_cell: location outside the domain");
  std::size_t cell = 0;
  std::size_t stride = 1;
  for (int a = 0; a < partition.domain.dim(); ++a) {
    const auto& e = partition.edges[a];
    const auto n = partition.cells_along(a);
    auto j = static_cast<int>(std::upper_bound(e.begin(), e.end(), u[a]) - e.begin()) - 1;
    j = std::clamp(j, 0, n - 1);
    cell += static_cast<std::size_t>(j) * stride;
    stride *= static_cast<std::size_t>(n);
  }
  return cell;
}

}  // namespace sparsefield
