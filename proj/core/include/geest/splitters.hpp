#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "geest/matrix.hpp"
#include "geest/plan.hpp"

namespace geest {

// All splitters are pure functions of (metadata, parameters, seed).

ResamplingPlan holdout(std::size_t n, double test_fraction, std::uint64_t seed);

/// Shuffles rows and deals them round-robin into k folds.
ResamplingPlan kfold(std::size_t n, std::size_t k, std::uint64_t seed);
ResamplingPlan repeated_kfold(std::size_t n, std::size_t k, std::size_t repeats, std::uint64_t seed);

/// Randomly partitions the distinct group ids into k folds; rows follow their
/// group. k equal to the number of groups gives leave-one-group-out.
ResamplingPlan grouped_kfold(std::span<const std::int64_t> groups, std::size_t k, std::uint64_t seed,
                             std::size_t repeats = 1);

/// Per-class round-robin dealing; a class with fewer rows than folds sends
/// its rows to distinct folds chosen uniformly at random.
ResamplingPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed,
                                std::size_t repeats = 1);

// --- spatial ---------------------------------------------------------------

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Euclidean distance; the one place the spatial splitters measure distance.
double distance(Point a, Point b);

/// Test side is a*x + b*y >= c.
struct HalfPlane {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
};

/// Test side is the closed interior of a simple polygon.
struct Polygon {
    std::vector<Point> vertices;
};

using Boundary = std::variant<HalfPlane, Polygon>;

/// One split: test = rows on the test side, train = rows on the other side
/// farther than buffer_width from the boundary.
ResamplingPlan single_spatial_split(const Matrix& coords, const Boundary& boundary, double buffer_width);

struct Grid {
    std::size_t rows = 1;
    std::size_t cols = 1;
    /// xmin, xmax, ymin, ymax; defaults to the bounding box of the points.
    std::optional<std::array<double, 4>> extent;
};

enum class TileMode { one_block_per_fold, blocks_to_k_folds };

/// Points on an interior grid line go to the tile with the larger index.
ResamplingPlan rectangular_tiles(const Matrix& coords, const Grid& grid, TileMode mode, std::size_t k,
                                 std::uint64_t seed);

/// k-means on `source` (coordinates or features); each cluster is a fold.
ResamplingPlan clustered_groups(const Matrix& source, std::size_t k, std::uint64_t seed,
                                const std::string& source_name = "coords");

/// Leave-one-out where training rows within buffer_radius of the test point
/// are dropped.
ResamplingPlan loo_buffer(const Matrix& coords, double buffer_radius);

/// k random discs; test = rows within disc_radius of the center, train = rows
/// beyond disc_radius + buffer_radius.
ResamplingPlan leave_one_disc_out(const Matrix& coords, std::size_t k, double disc_radius, double buffer_radius,
                                  std::uint64_t seed);

enum class UnitMode { one_unit_per_fold, units_to_k_folds };

ResamplingPlan geo_units(std::span<const std::int64_t> units, UnitMode mode, std::size_t k, std::uint64_t seed);

// --- temporal --------------------------------------------------------------

/// Season-level prequential validation: split j (1..S-1-gap) trains on
/// seasons 1..j and tests on season j+1+gap.
ResamplingPlan timeseries_cv(std::span<const int> season, int gap);

/// Single split: test = the last `test_seasons` seasons, train = everything
/// before them except the `gap` seasons right before the test block.
ResamplingPlan out_of_sample(std::span<const int> season, int test_seasons, int gap);

} // namespace geest
