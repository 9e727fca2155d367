#include "geest/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "geest/error.hpp"
#include "geest/rng.hpp"

namespace geest {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

struct Run {
    std::vector<int> assignment;
    Matrix centers;
    double wcss = std::numeric_limits<double>::infinity();
    std::vector<double> trace;
    int iterations = 0;
    bool degenerate = true;
};

Run lloyd(const Matrix& x, std::size_t k, Rng& rng, int max_iterations) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    Run run;
    run.centers = Matrix(k, p);

    // k-means++ seeding.
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = uniform_index(rng, n);
    std::copy(x.row(first).begin(), x.row(first).end(), run.centers.row(0).begin());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(x.row(i), run.centers.row(c - 1)));
            total += d2[i];
        }
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double r = uniform01(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && r < acc) {
                    pick = i;
                    break;
                }
            }
            while (d2[pick] == 0.0 && pick > 0) --pick;
        } else {
            pick = uniform_index(rng, n);
        }
        std::copy(x.row(pick).begin(), x.row(pick).end(), run.centers.row(c).begin());
    }

    run.assignment.assign(n, -1);
    std::vector<std::size_t> counts(k);
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double d = sq_dist(x.row(i), run.centers.row(c));
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            if (run.assignment[i] != best) {
                run.assignment[i] = best;
                changed = true;
            }
            obj += best_d;
        }
        run.trace.push_back(obj);
        run.iterations = it + 1;
        if (!changed && it > 0) break;

        Matrix sums(k, p);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto c = static_cast<std::size_t>(run.assignment[i]);
            ++counts[c];
            for (std::size_t j = 0; j < p; ++j) sums(c, j) += x(i, j);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty clusters keep their center
            for (std::size_t j = 0; j < p; ++j) run.centers(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        }
    }
    run.wcss = run.trace.back();
    std::fill(counts.begin(), counts.end(), 0);
    for (int a : run.assignment) ++counts[static_cast<std::size_t>(a)];
    run.degenerate = std::any_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; });
    return run;
}

} // namespace

KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    const std::size_t n = x.rows();
    if (k < 1) throw Error("k-means needs k >= 1");
    if (n < k) throw Error("k-means needs at least k rows");

    // Work on rows in lexicographic order so the result depends on the point
    // set only, not on how rows are numbered.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        auto ra = x.row(a), rb = x.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    Matrix sorted = x.select_rows(order);

    std::size_t distinct = n ? 1 : 0;
    for (std::size_t i = 1; i < n; ++i)
        if (!std::equal(sorted.row(i).begin(), sorted.row(i).end(), sorted.row(i - 1).begin())) ++distinct;
    if (distinct < k) throw Error("k-means needs at least k distinct rows (have " + std::to_string(distinct) + ")");

    Run best;
    bool found = false;
    std::uint64_t counter = 0;
    for (int round = 0; round <= options.empty_retries && !found; ++round) {
        for (int r = 0; r < options.restarts; ++r) {
            Rng rng = make_rng(seed, counter++);
            Run run = lloyd(sorted, k, rng, options.max_iterations);
            if (run.degenerate) continue;
            if (!found || run.wcss < best.wcss) {
                best = std::move(run);
                found = true;
            }
        }
    }
    if (!found) throw Error("k-means ended with an empty cluster after all retries");

    // Relabel by first appearance in sorted order.
    std::vector<int> relabel(k, -1);
    int next = 0;
    for (int a : best.assignment)
        if (relabel[static_cast<std::size_t>(a)] < 0) relabel[static_cast<std::size_t>(a)] = next++;

    KMeansResult out;
    out.assignment.assign(n, 0);
    for (std::size_t s = 0; s < n; ++s) out.assignment[order[s]] = relabel[static_cast<std::size_t>(best.assignment[s])];
    out.centers = Matrix(k, x.cols());
    for (std::size_t c = 0; c < k; ++c) {
        auto dst = out.centers.row(static_cast<std::size_t>(relabel[c]));
        auto src = best.centers.row(c);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    out.wcss = best.wcss;
    out.objective_trace = std::move(best.trace);
    out.iterations = best.iterations;
    return out;
}

} // namespace geest
