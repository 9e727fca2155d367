#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geest/hierarchy.hpp"
#include "geest/matrix.hpp"

namespace geest {

enum class LabelKind { real, class_id, hierarchical };

/// What a CSV column means.
enum class Role { feature, label, cluster, coord_x, coord_y, unit, pi, time, season, ignore };

Role parse_role(const std::string& s);
std::string to_string(Role r);
std::string to_string(LabelKind k);

/// Column-role mapping used when reading a CSV file.
struct Schema {
    std::vector<std::pair<std::string, Role>> columns;
    LabelKind label_kind = LabelKind::real;
    std::optional<std::int64_t> population_size;
    /// Required for hierarchical labels.
    std::shared_ptr<const CategoryTree> tree;
    /// Number of equal-width intervals on t in [0,1] used to derive seasons
    /// when no season column is present.
    int season_bins = 10;
};

/// Feature matrix, label column and role-tagged metadata. Treated as
/// immutable once validated; all modules take it by const reference.
struct Dataset {
    Matrix features;
    std::vector<std::string> feature_names;

    LabelKind label_kind = LabelKind::real;
    std::string label_name = "y";
    /// Regression labels.
    std::vector<double> y;
    /// Class index (into class_names) or tree node id for hierarchical labels.
    std::vector<int> classes;
    std::vector<std::string> class_names;
    std::shared_ptr<const CategoryTree> tree;

    std::optional<std::vector<std::int64_t>> cluster_id;
    std::optional<Matrix> coords;  // n x 2
    std::optional<std::vector<std::int64_t>> unit_id;
    std::optional<std::vector<double>> inclusion_prob;
    std::optional<std::vector<double>> time;
    std::optional<std::vector<int>> season;
    std::optional<std::int64_t> population_size;

    std::size_t n() const noexcept { return features.rows(); }
    std::size_t p() const noexcept { return features.cols(); }

    /// Throws geest::Error describing the first violated invariant.
    void validate() const;
};

Dataset load_dataset(const std::string& path, const Schema& schema);
Dataset read_dataset(std::istream& in, const Schema& schema);

/// Reads a CSV whose header carries roles as `name:role` tokens (the format
/// written by write_dataset). `tree` is needed for hierarchical labels.
Dataset load_dataset(const std::string& path, std::shared_ptr<const CategoryTree> tree = nullptr);
Dataset read_dataset(std::istream& in, std::shared_ptr<const CategoryTree> tree = nullptr);

/// Writes a CSV with role-tagged headers and shortest round-trip doubles.
void write_dataset(std::ostream& out, const Dataset& d);
void write_dataset(const std::string& path, const Dataset& d);

Dataset subset(const Dataset& d, std::span<const std::size_t> idx);

/// Equal-width season index (1-based) of t in [0,1] for `bins` intervals;
/// season s covers [(s-1)/bins, s/bins), t = 1 maps to the last season.
int season_of(double t, int bins);

} // namespace geest
