#include "semchange/clustering.hpp"
#include "semchange/error.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

using namespace semchange;
using semchange::testing::matrix_from;

namespace {

// Adjusted Rand index between two labelings.
double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra;
    std::map<int, double> rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    auto c2 = [](double x) { return x * (x - 1) / 2; };
    double index = 0;
    double sa = 0;
    double sb = 0;
    for (const auto& [k, v] : joint) index += c2(v);
    for (const auto& [k, v] : ra) sa += c2(v);
    for (const auto& [k, v] : rb) sb += c2(v);
    const double expected = sa * sb / c2(static_cast<double>(a.size()));
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) {
        return 1.0;
    }
    return (index - expected) / (max_index - expected);
}

struct Blobs {
    Matrix points;
    std::vector<int> truth;
};

Blobs two_blobs(std::size_t per_blob, std::size_t dim, Rng& rng) {
    Blobs b{Matrix(2 * per_blob, dim), {}};
    for (std::size_t i = 0; i < 2 * per_blob; ++i) {
        const int blob = i < per_blob ? 0 : 1;
        b.truth.push_back(blob);
        for (std::size_t j = 0; j < dim; ++j) {
            // means 10 apart along the first axis
            b.points(i, j) = (j == 0 ? 10.0 * blob : 0.0) + standard_normal(rng);
        }
    }
    return b;
}

// Minimal inertia over all bipartitions, by enumeration.
double brute_force_two_means(const Matrix& pts) {
    const std::size_t n = pts.rows;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask < (1u << n) - 1; ++mask) {
        double cost = 0;
        for (int side = 0; side < 2; ++side) {
            std::vector<double> mean(pts.cols, 0.0);
            int count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) == static_cast<unsigned>(side)) {
                    for (std::size_t j = 0; j < pts.cols; ++j) mean[j] += pts(i, j);
                    ++count;
                }
            }
            for (auto& x : mean) x /= count;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) == static_cast<unsigned>(side)) {
                    cost += squared_distance(pts.row(i), mean);
                }
            }
        }
        best = std::min(best, cost);
    }
    return best;
}

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t i = 0;
    for (const auto& r : rows) {
        std::copy(r.begin(), r.end(), m.row(i++).begin());
    }
    return m;
}

AffinityResult run_ap(const Matrix& pts, AffinityConfig cfg = {}) {
    auto sims = negative_squared_euclidean_similarities(pts);
    fill_preference(sims, cfg);
    return affinity_propagation(sims, cfg);
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("kmeans recovers two separated blobs") {
    Rng rng(1);
    const Blobs b = two_blobs(50, 3, rng);
    KMeansConfig cfg;
    cfg.k = 2;
    const auto r = kmeans(b.points, cfg);
    CHECK(adjusted_rand(r.labels, b.truth) == 1.0);
}

TEST_CASE("kmeans with n = k puts every point in its own cluster") {
    const Matrix pts = from_rows({{0, 0}, {1, 5}, {-3, 2}, {7, 7}});
    KMeansConfig cfg;
    cfg.k = 4;
    const auto r = kmeans(pts, cfg);
    CHECK(r.inertia == 0.0);
    CHECK(std::set<int>(r.labels.begin(), r.labels.end()).size() == 4);
}

TEST_CASE("kmeans on {0,1,2,10,11,12} splits in two with inertia 4") {
    const Matrix pts = from_rows({{0}, {1}, {2}, {10}, {11}, {12}});
    KMeansConfig cfg;
    cfg.k = 2;
    const auto r = kmeans(pts, cfg);
    CHECK(r.inertia == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(brute_force_two_means(pts) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(r.labels[0] == r.labels[1]);
    CHECK(r.labels[1] == r.labels[2]);
    CHECK(r.labels[3] == r.labels[4]);
    CHECK(r.labels[4] == r.labels[5]);
    CHECK(r.labels[0] != r.labels[3]);
}

TEST_CASE("kmeans errors") {
    KMeansConfig cfg;
    cfg.k = 3;
    CHECK_THROWS_WITH_AS(kmeans(from_rows({{0}, {1}}), cfg), doctest::Contains("too few usages"), Error);
    cfg.k = 0;
    CHECK_THROWS_AS(kmeans(from_rows({{0}, {1}}), cfg), Error);
}

TEST_CASE("kmeans inertia never increases within a run") {
    Rng rng(2);
    for (int t = 0; t < 30; ++t) {
        Matrix pts(60, 3);
        for (double& x : pts.data) x = standard_normal(rng) * (1 + t % 4);
        KMeansConfig cfg;
        cfg.k = 2 + t % 5;
        cfg.restarts = 1;
        cfg.seed = rng();
        const auto r = kmeans(pts, cfg);
        for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) {
            CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] * (1 + 1e-12));
        }
    }
}

TEST_CASE("more restarts never give higher inertia") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        Matrix pts(40, 2);
        for (double& x : pts.data) x = standard_normal(rng);
        KMeansConfig one;
        one.k = 4;
        one.restarts = 1;
        one.seed = static_cast<std::uint64_t>(t);
        KMeansConfig many = one;
        many.restarts = 8;
        CHECK(kmeans(pts, many).inertia <= kmeans(pts, one).inertia);
    }
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
    Rng rng(4);
    Matrix pts(50, 3);
    for (double& x : pts.data) x = standard_normal(rng);
    KMeansConfig cfg;
    cfg.seed = 99;
    const auto a = kmeans(pts, cfg);
    const auto b = kmeans(pts, cfg);
    CHECK(a.labels == b.labels);
    CHECK(a.inertia == b.inertia);
}

TEST_CASE("kmeans best of 32 restarts matches the bipartition optimum for n <= 8") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + uniform_below(rng, 7);
        Matrix pts(n, 2);
        for (double& x : pts.data) x = standard_normal(rng);
        KMeansConfig cfg;
        cfg.k = 2;
        cfg.restarts = 32;
        cfg.seed = rng();
        const double opt = brute_force_two_means(pts);
        CHECK(kmeans(pts, cfg).inertia == doctest::Approx(opt).epsilon(1e-9));
    }
}

TEST_CASE("kmeans keeps k clusters when a cluster empties") {
    // Two far outliers and a tight group: k-means++ seeds at the outliers are
    // likely, and repair must keep all labels populated.
    const Matrix pts = from_rows({{0}, {0.1}, {0.2}, {0.3}, {100}, {200}});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        KMeansConfig cfg;
        cfg.k = 4;
        cfg.restarts = 1;
        cfg.seed = seed;
        const auto r = kmeans(pts, cfg);
        CHECK(std::set<int>(r.labels.begin(), r.labels.end()).size() == 4);
    }
}

TEST_CASE("affinity propagation: identical points merge") {
    AffinityConfig cfg;
    cfg.preference = -1.0;
    const auto r = run_ap(from_rows({{1, 1}, {1, 1}}), cfg);
    CHECK(r.exemplars.size() == 1);
    CHECK(r.labels == std::vector<int>{0, 0});
    // all identical at the default (median) preference as well
    const auto all = run_ap(from_rows({{2, 3}, {2, 3}, {2, 3}, {2, 3}}));
    CHECK(all.exemplars.size() == 1);
}

TEST_CASE("affinity propagation matches the reference implementation on 3 points") {
    // Frozen from a vectorised numpy port of the scikit-learn 1.7 update loop
    // without its tie-breaking noise (damping 0.9, median off-diagonal
    // preference -625, 50 stable sweeps). Converges after 378 sweeps.
    const Matrix pts = from_rows({{0, 0}, {10, 0}, {0, 25}});
    auto sims = negative_squared_euclidean_similarities(pts);
    CHECK(median_off_diagonal(sims) == -625.0);
    const auto r = run_ap(pts);
    CHECK(r.converged);
    CHECK(r.iterations == 378);
    CHECK(r.exemplars == std::vector<std::size_t>{0, 1});
    CHECK(r.labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("affinity propagation matches the reference implementation on 14 points") {
    // Points and expected exemplars/labels frozen from scikit-learn 1.7 with
    // the same settings (preference = off-diagonal median = -20.300365).
    const Matrix pts = from_rows({{0.004, 0.896}, {-0.822, -2.672}, {-1.364, -2.975}, {0.18, 4.021},
                                  {-1.477, -1.861}, {1.47, 1.071}, {0.316, -2.791}, {-0.088, 2.086},
                                  {-4.033, -1.373}, {-5.704, -3.869}, {-5.525, -0.705}, {-3.802, 0.814},
                                  {0.47, -0.561}, {-7.55, -1.616}});
    const auto sims = negative_squared_euclidean_similarities(pts);
    CHECK(median_off_diagonal(sims) == doctest::Approx(-20.300365).epsilon(1e-9));
    const auto r = run_ap(pts);
    CHECK(r.converged);
    CHECK(r.exemplars == std::vector<std::size_t>{1, 7, 10});
    CHECK(r.labels == std::vector<int>{1, 0, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2, 0, 2});
}

TEST_CASE("affinity propagation keeps every cluster inside one blob") {
    Rng rng(6);
    const Blobs b = two_blobs(40, 3, rng);
    const auto r = run_ap(b.points);
    // Median preference splits one blob; the reference port (and
    // scikit-learn) give the same three exemplars.
    CHECK(r.exemplars == std::vector<std::size_t>{6, 56, 60});
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        CHECK(b.truth[i] == b.truth[r.exemplars[static_cast<std::size_t>(r.labels[i])]]);
    }
}

TEST_CASE("affinity propagation is permutation invariant") {
    Rng rng(7);
    for (int t = 0; t < 10; ++t) {
        const std::size_t n = 25;
        Matrix pts(n, 2);
        for (double& x : pts.data) x = standard_normal(rng) * 3;
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_below(rng, i + 1)]);
        Matrix permuted(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(pts.row(perm[i]).begin(), pts.row(perm[i]).end(), permuted.row(i).begin());
        }
        const auto a = run_ap(pts);
        const auto b = run_ap(permuted);
        std::set<std::size_t> mapped;
        for (auto e : b.exemplars) mapped.insert(perm[e]);
        CHECK(mapped == std::set<std::size_t>(a.exemplars.begin(), a.exemplars.end()));
        std::vector<int> pulled(n);
        for (std::size_t i = 0; i < n; ++i) pulled[perm[i]] = b.labels[i];
        CHECK(adjusted_rand(pulled, a.labels) == 1.0);
    }
}

TEST_CASE("affinity propagation reports non-convergence") {
    Rng rng(8);
    Matrix pts(30, 2);
    for (double& x : pts.data) x = standard_normal(rng);
    AffinityConfig cfg;
    cfg.max_iterations = 3;
    const auto r = run_ap(pts, cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.labels.size() == 30);
    CHECK(!r.exemplars.empty());
}

TEST_CASE("affinity propagation validates its configuration") {
    AffinityConfig cfg;
    cfg.damping = 0.4;
    CHECK_THROWS_AS(run_ap(from_rows({{0}, {1}}), cfg), Error);
    CHECK_THROWS_AS(run_ap(from_rows({{0}})), Error);
}

TEST_CASE("joint clustering") {
    Rng rng(9);
    SUBCASE("periods in different blobs get disjoint labels") {
        EmbeddingMatrix t("w", "t", 30, 2);
        EmbeddingMatrix t1("w", "t1", 30, 2);
        for (std::size_t i = 0; i < 30; ++i) {
            t.row(i)[0] = static_cast<float>(standard_normal(rng));
            t.row(i)[1] = static_cast<float>(standard_normal(rng));
            t1.row(i)[0] = static_cast<float>(10 + standard_normal(rng));
            t1.row(i)[1] = static_cast<float>(standard_normal(rng));
        }
        for (const auto method : {ClusterMethod::kmeans, ClusterMethod::affinity}) {
            JointClusterConfig cfg;
            cfg.kmeans.k = 2;
            const auto jc = joint_cluster(t, t1, method, cfg);
            CHECK(jc.k == 2);
            CHECK(std::set<int>(jc.labels_earlier.begin(), jc.labels_earlier.end()).size() == 1);
            CHECK(std::set<int>(jc.labels_later.begin(), jc.labels_later.end()).size() == 1);
            CHECK(jc.labels_earlier[0] != jc.labels_later[0]);
        }
    }
    SUBCASE("k = 1 puts everything in cluster 0") {
        const auto t = semchange::testing::random_matrix("w", "t", 10, 3, rng);
        JointClusterConfig cfg;
        cfg.kmeans.k = 1;
        const auto jc = joint_cluster(t, t, ClusterMethod::kmeans, cfg);
        CHECK(jc.k == 1);
        CHECK(std::all_of(jc.labels_earlier.begin(), jc.labels_earlier.end(), [](int l) { return l == 0; }));
        CHECK(std::all_of(jc.labels_later.begin(), jc.labels_later.end(), [](int l) { return l == 0; }));
    }
    SUBCASE("label bookkeeping: 3 and 5 usages, all labels used") {
        const auto t = semchange::testing::random_matrix("w", "t", 3, 2, rng);
        const auto t1 = semchange::testing::random_matrix("w", "t1", 5, 2, rng);
        JointClusterConfig cfg;
        cfg.kmeans.k = 3;
        const auto jc = joint_cluster(t, t1, ClusterMethod::kmeans, cfg);
        CHECK(jc.labels_earlier.size() == 3);
        CHECK(jc.labels_later.size() == 5);
        std::vector<int> counts(jc.k, 0);
        for (int l : jc.labels_earlier) ++counts.at(static_cast<std::size_t>(l));
        for (int l : jc.labels_later) ++counts.at(static_cast<std::size_t>(l));
        CHECK(std::all_of(counts.begin(), counts.end(), [](int c) { return c > 0; }));
    }
    SUBCASE("empty period") {
        const auto t = semchange::testing::random_matrix("w", "t", 3, 2, rng);
        const EmbeddingMatrix none("w", "t1", 0, 2);
        CHECK_THROWS_WITH_AS(joint_cluster(t, none, ClusterMethod::kmeans, {}),
                             doctest::Contains("word absent in period"), Error);
    }
    SUBCASE("too few pooled usages for k") {
        const auto t = semchange::testing::random_matrix("w", "t", 2, 2, rng);
        CHECK_THROWS_WITH_AS(joint_cluster(t, t, ClusterMethod::kmeans, {}), doctest::Contains("too few usages"),
                             Error);
    }
}

TEST_CASE("relabel_contiguous") {
    std::vector<int> labels{7, 3, 7, 9, 3};
    CHECK(relabel_contiguous(labels) == 3);
    CHECK(labels == std::vector<int>{0, 1, 0, 2, 1});
}

}  // TEST_SUITE
