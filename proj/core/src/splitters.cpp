#include "geest/splitters.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <limits>
#include <sstream>

#include "geest/error.hpp"
#include "geest/kmeans.hpp"
#include "geest/rng.hpp"

namespace geest {

namespace {

constexpr int max_disc_attempts = 1000;

std::string str(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

/// Appends one split per fold of `fold` (values 0..k-1; rows with -1 are in
/// neither set).
void append_folds(ResamplingPlan& plan, const std::vector<int>& fold, std::size_t k, int repeat) {
    std::vector<Split> splits(k);
    for (std::size_t i = 0; i < fold.size(); ++i) {
        if (fold[i] < 0) continue;
        for (std::size_t f = 0; f < k; ++f) {
            if (static_cast<int>(f) == fold[i]) splits[f].test.push_back(i);
            else splits[f].train.push_back(i);
        }
    }
    for (auto& s : splits) {
        if (s.test.empty() || s.train.empty()) throw Error("fold with empty train or test set");
        plan.splits.push_back(std::move(s));
        plan.repeat.push_back(repeat);
    }
}

std::vector<int> deal_round_robin(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(idx.begin(), idx.end(), rng);
    std::vector<int> fold(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold[idx[pos]] = static_cast<int>(pos % k);
    return fold;
}

Point point(const Matrix& coords, std::size_t i) { return {coords(i, 0), coords(i, 1)}; }

void require_coords(const Matrix& coords) {
    if (coords.cols() != 2) throw Error("spatial splitters need an n x 2 coordinate matrix");
    if (coords.rows() < 2) throw Error("spatial splitters need at least two points");
}

double segment_distance(Point p, Point a, Point b) {
    double dx = b.x - a.x, dy = b.y - a.y;
    double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, {a.x + t * dx, a.y + t * dy});
}

/// Signed distance to the boundary: >= 0 on the test side.
double signed_distance(Point p, const Boundary& boundary) {
    if (const auto* hp = std::get_if<HalfPlane>(&boundary)) {
        double norm = std::hypot(hp->a, hp->b);
        if (norm == 0.0) throw Error("half-plane boundary needs a nonzero normal (a, b)");
        return (hp->a * p.x + hp->b * p.y - hp->c) / norm;
    }
    const auto& poly = std::get<Polygon>(boundary).vertices;
    if (poly.size() < 3) throw Error("polygon boundary needs at least three vertices");
    double d = std::numeric_limits<double>::infinity();
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        d = std::min(d, segment_distance(p, poly[j], poly[i]));
        const Point& a = poly[i];
        const Point& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return (inside || d == 0.0) ? d : -d;
}

std::vector<std::int64_t> distinct_sorted(std::span<const std::int64_t> v) {
    std::vector<std::int64_t> out(v.begin(), v.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Number of seasons S; every season 1..S must have observations.
int season_count(std::span<const int> season) {
    if (season.empty()) throw Error("season vector is empty");
    int s_max = *std::max_element(season.begin(), season.end());
    int s_min = *std::min_element(season.begin(), season.end());
    if (s_min < 1) throw Error("season indices must start at 1");
    std::vector<char> present(static_cast<std::size_t>(s_max) + 1);
    for (int s : season) present[static_cast<std::size_t>(s)] = 1;
    for (int s = 1; s <= s_max; ++s)
        if (!present[static_cast<std::size_t>(s)]) throw Error("season " + std::to_string(s) + " has no observations");
    return s_max;
}

} // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

ResamplingPlan holdout(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("holdout test fraction must lie in (0,1)");
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (n_test < 1 || n_test >= n) throw Error("holdout leaves an empty train or test set");
    ResamplingPlan plan{.scheme = "holdout", .params = {{"test_fraction", str(test_fraction)}}, .seed = seed, .n = n};
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(seed, 0);
    shuffle(idx.begin(), idx.end(), rng);
    Split s;
    s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    plan.splits.push_back(std::move(s));
    plan.repeat.push_back(0);
    return plan;
}

ResamplingPlan repeated_kfold(std::size_t n, std::size_t k, std::size_t repeats, std::uint64_t seed) {
    if (k < 2) throw Error("k-fold needs k >= 2");
    if (k > n) throw Error("k-fold needs k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    if (repeats < 1) throw Error("repeats must be >= 1");
    ResamplingPlan plan{.scheme = repeats == 1 ? "kfold" : "repeated_kfold",
                        .params = {{"k", std::to_string(k)}, {"repeats", std::to_string(repeats)}},
                        .seed = seed,
                        .n = n,
                        .partition = true};
    for (std::size_t r = 0; r < repeats; ++r) {
        Rng rng = make_rng(seed, r);
        append_folds(plan, deal_round_robin(n, k, rng), k, static_cast<int>(r));
    }
    return plan;
}

ResamplingPlan kfold(std::size_t n, std::size_t k, std::uint64_t seed) { return repeated_kfold(n, k, 1, seed); }

ResamplingPlan grouped_kfold(std::span<const std::int64_t> groups, std::size_t k, std::uint64_t seed,
                             std::size_t repeats) {
    if (k < 2) throw Error("grouped k-fold needs k >= 2");
    if (repeats < 1) throw Error("repeats must be >= 1");
    auto ids = distinct_sorted(groups);
    if (ids.size() < k)
        throw Error("grouped k-fold needs at least k groups (have " + std::to_string(ids.size()) + ", k=" +
                    std::to_string(k) + ")");
    ResamplingPlan plan{.scheme = "grouped_kfold",
                        .params = {{"k", std::to_string(k)}, {"repeats", std::to_string(repeats)}},
                        .seed = seed,
                        .n = groups.size(),
                        .partition = true};
    for (std::size_t r = 0; r < repeats; ++r) {
        Rng rng = make_rng(seed, r);
        auto group_fold = deal_round_robin(ids.size(), k, rng);
        std::vector<int> fold(groups.size());
        for (std::size_t i = 0; i < groups.size(); ++i) {
            auto g = std::lower_bound(ids.begin(), ids.end(), groups[i]) - ids.begin();
            fold[i] = group_fold[static_cast<std::size_t>(g)];
        }
        append_folds(plan, fold, k, static_cast<int>(r));
    }
    return plan;
}

ResamplingPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed, std::size_t repeats) {
    if (k < 2) throw Error("stratified k-fold needs k >= 2");
    if (labels.size() < k) throw Error("stratified k-fold needs n >= k");
    if (repeats < 1) throw Error("repeats must be >= 1");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    ResamplingPlan plan{.scheme = "stratified_kfold",
                        .params = {{"k", std::to_string(k)}, {"repeats", std::to_string(repeats)}},
                        .seed = seed,
                        .n = labels.size(),
                        .partition = true};
    for (std::size_t r = 0; r < repeats; ++r) {
        Rng rng = make_rng(seed, r);
        std::vector<int> fold(labels.size(), -1);
        // Large classes continue dealing where the previous one stopped, which
        // keeps overall fold sizes balanced too.
        std::size_t cursor = uniform_index(rng, k);
        for (auto& [cls, rows] : by_class) {
            std::vector<std::size_t> members = rows;
            shuffle(members.begin(), members.end(), rng);
            if (members.size() >= k) {
                for (std::size_t m = 0; m < members.size(); ++m) fold[members[m]] = static_cast<int>((cursor + m) % k);
                cursor = (cursor + members.size()) % k;
            } else {
                std::vector<int> folds(k);
                std::iota(folds.begin(), folds.end(), 0);
                shuffle(folds.begin(), folds.end(), rng);
                for (std::size_t m = 0; m < members.size(); ++m) fold[members[m]] = folds[m];
            }
        }
        append_folds(plan, fold, k, static_cast<int>(r));
    }
    return plan;
}

ResamplingPlan single_spatial_split(const Matrix& coords, const Boundary& boundary, double buffer_width) {
    require_coords(coords);
    if (!(buffer_width >= 0.0)) throw Error("buffer width must be >= 0");
    ResamplingPlan plan{.scheme = "single_spatial_split", .params = {{"buffer", str(buffer_width)}}, .n = coords.rows()};
    if (const auto* hp = std::get_if<HalfPlane>(&boundary)) {
        plan.params["boundary"] = "halfplane:" + str(hp->a) + "," + str(hp->b) + "," + str(hp->c);
    } else {
        std::string v;
        for (const auto& p : std::get<Polygon>(boundary).vertices) v += (v.empty() ? "" : ";") + str(p.x) + "," + str(p.y);
        plan.params["boundary"] = "polygon:" + v;
    }
    Split s;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        double d = signed_distance(point(coords, i), boundary);
        if (d >= 0.0) s.test.push_back(i);
        else if (-d > buffer_width) s.train.push_back(i);
    }
    if (s.test.empty()) throw Error("single spatial split: no points on the test side");
    if (s.train.empty()) throw Error("single spatial split: buffer leaves no training points");
    plan.splits.push_back(std::move(s));
    plan.repeat.push_back(0);
    return plan;
}

ResamplingPlan rectangular_tiles(const Matrix& coords, const Grid& grid, TileMode mode, std::size_t k,
                                 std::uint64_t seed) {
    require_coords(coords);
    if (grid.rows < 1 || grid.cols < 1) throw Error("grid needs at least one row and column");
    const std::size_t n = coords.rows();
    std::array<double, 4> ext{};
    if (grid.extent) {
        ext = *grid.extent;
    } else {
        auto xs = coords.column(0), ys = coords.column(1);
        ext = {*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end()),
               *std::min_element(ys.begin(), ys.end()), *std::max_element(ys.begin(), ys.end())};
    }
    if (!(ext[1] >= ext[0] && ext[3] >= ext[2])) throw Error("grid extent is inverted");

    // Interior boundary positions; a point exactly on a boundary counts as
    // beyond it, i.e. in the higher-index tile.
    auto edges = [](double lo, double hi, std::size_t cells) {
        std::vector<double> e;
        for (std::size_t j = 1; j < cells; ++j)
            e.push_back(lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(cells));
        return e;
    };
    auto xe = edges(ext[0], ext[1], grid.cols);
    auto ye = edges(ext[2], ext[3], grid.rows);

    std::vector<std::size_t> block(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = coords(i, 0), y = coords(i, 1);
        if (x < ext[0] || x > ext[1] || y < ext[2] || y > ext[3])
            throw Error("point " + std::to_string(i) + " lies outside the grid extent");
        auto col = static_cast<std::size_t>(std::upper_bound(xe.begin(), xe.end(), x) - xe.begin());
        auto row = static_cast<std::size_t>(std::upper_bound(ye.begin(), ye.end(), y) - ye.begin());
        block[i] = row * grid.cols + col;
    }
    std::vector<std::size_t> nonempty(block.begin(), block.end());
    std::sort(nonempty.begin(), nonempty.end());
    nonempty.erase(std::unique(nonempty.begin(), nonempty.end()), nonempty.end());

    ResamplingPlan plan{.scheme = "rectangular_tiles",
                        .params = {{"grid", std::to_string(grid.rows) + "x" + std::to_string(grid.cols)}},
                        .seed = seed,
                        .n = n,
                        .partition = true};
    std::vector<int> fold(n);
    std::size_t folds = 0;
    if (mode == TileMode::one_block_per_fold) {
        plan.params["mode"] = "one_block_per_fold";
        if (nonempty.size() < 2) throw Error("all points fall into one tile; one-block-per-fold needs at least two");
        folds = nonempty.size();
        for (std::size_t i = 0; i < n; ++i)
            fold[i] = static_cast<int>(std::lower_bound(nonempty.begin(), nonempty.end(), block[i]) - nonempty.begin());
    } else {
        plan.params["mode"] = "blocks_to_k_folds";
        plan.params["k"] = std::to_string(k);
        if (k < 2) throw Error("blocks_to_k_folds needs k >= 2");
        if (nonempty.size() < k)
            throw Error("only " + std::to_string(nonempty.size()) + " nonempty tiles for k=" + std::to_string(k));
        Rng rng = make_rng(seed, 0);
        auto block_fold = deal_round_robin(nonempty.size(), k, rng);
        folds = k;
        for (std::size_t i = 0; i < n; ++i) {
            auto b = std::lower_bound(nonempty.begin(), nonempty.end(), block[i]) - nonempty.begin();
            fold[i] = block_fold[static_cast<std::size_t>(b)];
        }
    }
    append_folds(plan, fold, folds, 0);
    return plan;
}

ResamplingPlan clustered_groups(const Matrix& source, std::size_t k, std::uint64_t seed, const std::string& source_name) {
    if (k < 2) throw Error("clustered groups need k >= 2");
    if (source.rows() < 2 || source.cols() < 1) throw Error("clustered groups need a nonempty source matrix");
    auto km = kmeans(source, k, seed);
    ResamplingPlan plan{.scheme = "clustered_groups",
                        .params = {{"k", std::to_string(k)}, {"source", source_name}},
                        .seed = seed,
                        .n = source.rows(),
                        .partition = true};
    append_folds(plan, km.assignment, k, 0);
    return plan;
}

ResamplingPlan loo_buffer(const Matrix& coords, double buffer_radius) {
    require_coords(coords);
    if (!(buffer_radius >= 0.0)) throw Error("buffer radius must be >= 0");
    const std::size_t n = coords.rows();
    ResamplingPlan plan{.scheme = "loo_buffer", .params = {{"buffer", str(buffer_radius)}}, .n = n, .partition = true};
    for (std::size_t i = 0; i < n; ++i) {
        Split s;
        s.test.push_back(i);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && distance(point(coords, i), point(coords, j)) > buffer_radius) s.train.push_back(j);
        if (s.train.empty()) throw Error("leave-one-out buffer leaves no training points for test index " + std::to_string(i));
        plan.splits.push_back(std::move(s));
        plan.repeat.push_back(0);
    }
    return plan;
}

ResamplingPlan leave_one_disc_out(const Matrix& coords, std::size_t k, double disc_radius, double buffer_radius,
                                  std::uint64_t seed) {
    require_coords(coords);
    if (k < 1) throw Error("leave-one-disc-out needs k >= 1");
    if (!(disc_radius > 0.0)) throw Error("disc radius must be > 0");
    if (!(buffer_radius >= 0.0)) throw Error("buffer radius must be >= 0");
    const std::size_t n = coords.rows();
    auto xs = coords.column(0), ys = coords.column(1);
    const double x0 = *std::min_element(xs.begin(), xs.end()), x1 = *std::max_element(xs.begin(), xs.end());
    const double y0 = *std::min_element(ys.begin(), ys.end()), y1 = *std::max_element(ys.begin(), ys.end());

    ResamplingPlan plan{.scheme = "leave_one_disc_out",
                        .params = {{"k", std::to_string(k)}, {"radius", str(disc_radius)}, {"buffer", str(buffer_radius)}},
                        .seed = seed,
                        .n = n};
    Rng rng = make_rng(seed, 0);
    for (std::size_t d = 0; d < k; ++d) {
        bool placed = false;
        for (int attempt = 0; attempt < max_disc_attempts && !placed; ++attempt) {
            Point c{x0 + (x1 - x0) * uniform01(rng), y0 + (y1 - y0) * uniform01(rng)};
            Split s;
            for (std::size_t i = 0; i < n; ++i) {
                double dist = distance(c, point(coords, i));
                if (dist <= disc_radius) s.test.push_back(i);
                else if (dist > disc_radius + buffer_radius) s.train.push_back(i);
            }
            if (s.test.empty() || s.train.empty()) continue;
            plan.splits.push_back(std::move(s));
            plan.repeat.push_back(0);
            plan.params["center" + std::to_string(d + 1)] = str(c.x) + "," + str(c.y);
            placed = true;
        }
        if (!placed)
            throw Error("could not place disc " + std::to_string(d + 1) + " with nonempty test and train sets in " +
                        std::to_string(max_disc_attempts) + " attempts");
    }
    return plan;
}

ResamplingPlan geo_units(std::span<const std::int64_t> units, UnitMode mode, std::size_t k, std::uint64_t seed) {
    auto ids = distinct_sorted(units);
    if (ids.size() < 2) throw Error("geographical-unit partitioning needs at least two distinct units");
    if (mode == UnitMode::units_to_k_folds) {
        auto plan = grouped_kfold(units, k, seed);
        plan.scheme = "geo_units";
        plan.params["mode"] = "units_to_k_folds";
        return plan;
    }
    ResamplingPlan plan{.scheme = "geo_units",
                        .params = {{"mode", "one_unit_per_fold"}},
                        .seed = seed,
                        .n = units.size(),
                        .partition = true};
    std::vector<int> fold(units.size());
    for (std::size_t i = 0; i < units.size(); ++i)
        fold[i] = static_cast<int>(std::lower_bound(ids.begin(), ids.end(), units[i]) - ids.begin());
    append_folds(plan, fold, ids.size(), 0);
    return plan;
}

ResamplingPlan timeseries_cv(std::span<const int> season, int gap) {
    if (gap < 0) throw Error("gap must be >= 0");
    const int s_max = season_count(season);
    if (s_max < 2 + gap)
        throw Error("time-series CV needs at least " + std::to_string(2 + gap) + " seasons for gap " + std::to_string(gap) +
                    " (have " + std::to_string(s_max) + ")");
    ResamplingPlan plan{.scheme = "timeseries_cv",
                        .params = {{"gap", std::to_string(gap)}, {"seasons", std::to_string(s_max)}},
                        .n = season.size()};
    for (int j = 1; j <= s_max - 1 - gap; ++j) {
        Split s;
        for (std::size_t i = 0; i < season.size(); ++i) {
            if (season[i] <= j) s.train.push_back(i);
            else if (season[i] == j + 1 + gap) s.test.push_back(i);
        }
        plan.splits.push_back(std::move(s));
        plan.repeat.push_back(0);
    }
    return plan;
}

ResamplingPlan out_of_sample(std::span<const int> season, int test_seasons, int gap) {
    if (gap < 0) throw Error("gap must be >= 0");
    if (test_seasons < 1) throw Error("out-of-sample validation needs at least one test season");
    const int s_max = season_count(season);
    const int last_train = s_max - test_seasons - gap;
    if (last_train < 1)
        throw Error("out-of-sample validation leaves no training seasons (S=" + std::to_string(s_max) +
                    ", test_seasons=" + std::to_string(test_seasons) + ", gap=" + std::to_string(gap) + ")");
    ResamplingPlan plan{.scheme = "out_of_sample",
                        .params = {{"gap", std::to_string(gap)}, {"test_seasons", std::to_string(test_seasons)}},
                        .n = season.size()};
    Split s;
    for (std::size_t i = 0; i < season.size(); ++i) {
        if (season[i] > s_max - test_seasons) s.test.push_back(i);
        else if (season[i] <= last_train) s.train.push_back(i);
    }
    plan.splits.push_back(std::move(s));
    plan.repeat.push_back(0);
    return plan;
}

} // namespace geest
