#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsefield/rng.hpp"

namespace sparsefield {

inline constexpr int kMaxDim = 3;

/// Raised when an argument violates a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point of a d-dimensional domain, 1 <= d <= kMaxDim.
struct Location {
  std::array<double, kMaxDim> x{};
  int dim = 1;

  Location() = default;
  Location(std::initializer_list<double> coords);

  double operator[](int axis) const { return x[axis]; }
  double& operator[](int axis) { return x[axis]; }

  friend bool operator==(const Location& a, const Location& b);
};

using LocationList = std::vector<Location>;

/// Squared Euclidean distance.  Every neighbor search compares these values,
/// so brute force and indexed search agree bit-for-bit.
inline double squared_distance(const Location& a, const Location& b) {
  double s = 0.0;
  for (int k = 0; k < a.dim; ++k) {
    const double diff = a.x[k] - b.x[k];
    s += diff * diff;
  }
  return s;
}

double distance(const Location& a, const Location& b);

/// Axis-aligned box [lower, upper].
struct Domain {
  Location lower;
  Location upper;

  Domain(Location lo, Location hi);
  int dim() const { return lower.dim; }
  bool contains(const Location& u) const;
  double diameter() const;
};

double volume(const Domain& domain);

enum class GridStyle { kCellCentered, kEndpointInclusive };

/// Largest number of grid points any grid constructor will produce.
inline constexpr std::size_t kGridCap = 20'000'000;

LocationList regular_grid(const Domain& domain, std::span<const int> counts, GridStyle style);

/// Nested endpoint-inclusive dyadic grids.  Level n has base_counts[a]*2^n
/// intervals along axis a; points are stored as integer lattice indices so
/// D_n is an exact subset of D_{n+1}.
struct GridSchedule {
  Domain domain;
  std::vector<int> base_counts;
  int level = 0;

  int intervals(int axis) const { return base_counts[axis] << level; }
  std::size_t size() const;
  LocationList locations() const;
  /// Integer lattice coordinates of every point at this level, in the same
  /// order as locations().
  std::vector<std::array<std::int64_t, kMaxDim>> lattice() const;
  /// For every point of this level, its index in the next finer level.
  std::vector<std::size_t> indices_in_refined() const;
};

GridSchedule refine(const GridSchedule& schedule);

LocationList uniform_locations(const Domain& domain, std::size_t count, StreamKey key);

/// Indices of the min(m, |candidates|) closest candidates, ordered by
/// (distance, index).  Only candidates with index < limit are considered.
std::vector<int> nearest_neighbors(const Location& query, std::span<const Location> candidates,
                                   int m);
std::vector<int> nearest_neighbors(const Location& query, std::span<const Location> candidates,
                                   int m, std::size_t limit);

/// Indices with distance strictly below radius, sorted by index.
std::vector<int> radius_neighbors(const Location& query, std::span<const Location> candidates,
                                  double radius);
std::vector<int> radius_neighbors(const Location& query, std::span<const Location> candidates,
                                  double radius, std::size_t limit);

/// Immutable uniform-bucket index over a candidate set.  Queries return
/// exactly what the brute-force functions above return; below
/// kBruteForceThreshold candidates they simply delegate to them.
class NeighborIndex {
 public:
  static constexpr std::size_t kBruteForceThreshold = 512;

  explicit NeighborIndex(LocationList candidates);

  std::vector<int> nearest(const Location& query, int m) const;
  std::vector<int> nearest(const Location& query, int m, std::size_t limit) const;
  std::vector<int> within(const Location& query, double radius) const;
  std::vector<int> within(const Location& query, double radius, std::size_t limit) const;

  const LocationList& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  bool use_buckets() const { return points_.size() > kBruteForceThreshold; }
  std::array<int, kMaxDim> cell_of(const Location& u) const;
  std::size_t flat(const std::array<int, kMaxDim>& cell) const;
  template <typename Visit>
  void visit_box(const std::array<int, kMaxDim>& lo, const std::array<int, kMaxDim>& hi,
                 Visit&& visit) const;

  LocationList points_;
  int dim_ = 1;
  std::array<double, kMaxDim> origin_{};
  std::array<double, kMaxDim> width_{};
  std::array<int, kMaxDim> cells_{};
  std::vector<std::size_t> bucket_start_;
  std::vector<int> bucket_items_;
};

/// Half-open box partition of a domain.  Along each axis the boundaries
/// are lower + offset + k*side, clipped to the domain; the last cell along
/// each axis is closed above so the partition covers the compact domain.
struct Partition {
  Domain domain;
  std::vector<int> counts;          // requested cells per axis
  std::vector<double> side;         // congruent cell side per axis
  std::vector<double> offset;       // shift in [0, side) per axis
  std::vector<std::vector<double>> edges;  // boundaries per axis, including domain faces
  std::size_t cell_count = 0;
  LocationList centroids;

  int cells_along(int axis) const { return static_cast<int>(edges[axis].size()) - 1; }
  std::array<int, kMaxDim> unflatten(std::size_t cell) const;
};

Partition make_partition(const Domain& domain, std::span<const int> counts,
                         std::span<const double> offset = {});

std::size_t locate_cell(const Partition& partition, const Location& u);

}  // namespace sparsefield
