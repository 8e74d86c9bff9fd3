#include "semchange/clustering.hpp"

#include "semchange/error.hpp"
#include "semchange/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace semchange {

std::string to_string(ClusterMethod method) {
    return method == ClusterMethod::kmeans ? "kmeans" : "affinity";
}

namespace {

Matrix kmeanspp_init(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows;
    Matrix centroids(k, points.cols);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    std::size_t pick = static_cast<std::size_t>(uniform_below(rng, n));
    for (std::size_t c = 0; c < k; ++c) {
        if (c > 0) {
            double total = 0.0;
            for (double d : d2) {
                total += d;
            }
            if (total > 0.0) {
                const double target = uniform01(rng) * total;
                double acc = 0.0;
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc > target && d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(uniform_below(rng, n));
            }
        }
        std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
        }
    }
    return centroids;
}

// Assigns each point to its nearest centroid (lowest index on ties).
// Returns whether any label changed; writes the resulting inertia.
bool assign(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
            std::vector<double>& dist, double& inertia) {
    bool changed = false;
    inertia = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.rows; ++c) {
            const double d = squared_distance(points.row(i), centroids.row(c));
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        if (labels[i] != best) {
            labels[i] = best;
            changed = true;
        }
        dist[i] = best_d;
        inertia += best_d;
    }
    return changed;
}

// Recomputes centroids as cluster means and reseeds empty clusters at the
// points farthest from their new centroid. Returns the summed squared shift.
double update_centroids(const Matrix& points, const std::vector<int>& labels, Matrix& centroids) {
    const std::size_t k = centroids.rows;
    Matrix next(k, points.cols);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        ++sizes[c];
        auto dst = next.row(c);
        const auto src = points.row(i);
        for (std::size_t j = 0; j < points.cols; ++j) {
            dst[j] += src[j];
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] > 0) {
            for (double& x : next.row(c)) {
                x /= static_cast<double>(sizes[c]);
            }
        }
    }

    std::vector<bool> taken(points.rows, false);
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] > 0) {
            continue;
        }
        std::size_t far = points.rows;
        double far_d = -1.0;
        for (std::size_t i = 0; i < points.rows; ++i) {
            const auto own = static_cast<std::size_t>(labels[i]);
            if (taken[i] || sizes[own] < 2) {
                continue;
            }
            const double d = squared_distance(points.row(i), next.row(own));
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far == points.rows) {
            continue;
        }
        taken[far] = true;
        std::copy(points.row(far).begin(), points.row(far).end(), next.row(c).begin());
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        shift += squared_distance(centroids.row(c), next.row(c));
    }
    centroids = std::move(next);
    return shift;
}

// Single-point transfers (Hartigan): moves a point to another cluster
// whenever that lowers inertia, until no move does.
void transfer_points(const Matrix& points, std::vector<int>& labels, Matrix& centroids) {
    const std::size_t k = centroids.rows;
    const std::size_t dim = points.cols;
    std::vector<std::size_t> sizes(k, 0);
    Matrix sums(k, dim);
    for (std::size_t i = 0; i < points.rows; ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        ++sizes[c];
        for (std::size_t j = 0; j < dim; ++j) {
            sums(c, j) += points(i, j);
        }
    }
    auto refresh = [&](std::size_t c) {
        for (std::size_t j = 0; j < dim; ++j) {
            centroids(c, j) = sizes[c] > 0 ? sums(c, j) / static_cast<double>(sizes[c]) : centroids(c, j);
        }
    };
    for (std::size_t c = 0; c < k; ++c) {
        refresh(c);
    }

    for (bool moved = true; moved;) {
        moved = false;
        for (std::size_t i = 0; i < points.rows; ++i) {
            const auto a = static_cast<std::size_t>(labels[i]);
            if (sizes[a] < 2) {
                continue;
            }
            const double na = static_cast<double>(sizes[a]);
            const double leave = na / (na - 1.0) * squared_distance(points.row(i), centroids.row(a));
            double best_gain = 1e-12 * std::max(1.0, leave);
            std::size_t best = a;
            for (std::size_t b = 0; b < k; ++b) {
                if (b == a) {
                    continue;
                }
                const double nb = static_cast<double>(sizes[b]);
                const double join = nb / (nb + 1.0) * squared_distance(points.row(i), centroids.row(b));
                if (leave - join > best_gain) {
                    best_gain = leave - join;
                    best = b;
                }
            }
            if (best == a) {
                continue;
            }
            for (std::size_t j = 0; j < dim; ++j) {
                sums(a, j) -= points(i, j);
                sums(best, j) += points(i, j);
            }
            --sizes[a];
            ++sizes[best];
            refresh(a);
            refresh(best);
            labels[i] = static_cast<int>(best);
            moved = true;
        }
    }
}

double inertia_of(const Matrix& points, const std::vector<int>& labels, const Matrix& centroids) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
        total += squared_distance(points.row(i), centroids.row(static_cast<std::size_t>(labels[i])));
    }
    return total;
}

KMeansResult lloyd(const Matrix& points, const KMeansConfig& config, Rng& rng) {
    KMeansResult run;
    run.centroids = kmeanspp_init(points, config.k, rng);
    run.labels.assign(points.rows, -1);
    std::vector<double> dist(points.rows, 0.0);

    for (std::size_t it = 0; it < config.max_iterations; ++it) {
        double inertia = 0.0;
        const bool changed = assign(points, run.centroids, run.labels, dist, inertia);
        run.inertia = inertia;
        run.inertia_trace.push_back(inertia);
        run.iterations = it + 1;
        if (!changed) {
            break;
        }
        const double shift = update_centroids(points, run.labels, run.centroids);
        if (shift <= config.tolerance) {
            assign(points, run.centroids, run.labels, dist, inertia);
            run.inertia = inertia;
            run.inertia_trace.push_back(inertia);
            break;
        }
    }
    transfer_points(points, run.labels, run.centroids);
    const double refined = inertia_of(points, run.labels, run.centroids);
    if (refined < run.inertia) {
        run.inertia = refined;
        run.inertia_trace.push_back(refined);
    }
    return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, const KMeansConfig& config) {
    if (config.k < 1) {
        throw Error("k must be >= 1");
    }
    if (config.restarts < 1 || config.max_iterations < 1) {
        throw Error("restarts and max_iterations must be >= 1");
    }
    if (!(config.tolerance >= 0.0)) {
        throw Error("tolerance must be >= 0");
    }
    if (points.rows < config.k) {
        throw Error("too few usages: " + std::to_string(points.rows) + " points for k = " +
                    std::to_string(config.k));
    }
    Rng rng(config.seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < config.restarts; ++r) {
        KMeansResult run = lloyd(points, config, rng);
        if (run.inertia < best.inertia) {
            best = std::move(run);
        }
    }
    return best;
}

double median_off_diagonal(const SimilarityMatrix& sims) {
    if (sims.n < 2) {
        throw Error("affinity propagation needs at least 2 points");
    }
    std::vector<double> values;
    values.reserve(sims.n * (sims.n - 1));
    for (std::size_t i = 0; i < sims.n; ++i) {
        for (std::size_t j = 0; j < sims.n; ++j) {
            if (i != j) {
                values.push_back(sims(i, j));
            }
        }
    }
    const std::size_t m = values.size();
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m / 2), values.end());
    const double upper = values[m / 2];
    if (m % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m / 2));
    return 0.5 * (lower + upper);
}

void fill_preference(SimilarityMatrix& sims, const AffinityConfig& config) {
    const double pref = config.preference ? *config.preference : median_off_diagonal(sims);
    for (std::size_t i = 0; i < sims.n; ++i) {
        sims(i, i) = pref;
    }
}

namespace {

// Nearest exemplar by similarity for every point; exemplars label themselves.
std::vector<int> assign_to_exemplars(const SimilarityMatrix& s, const std::vector<std::size_t>& exemplars) {
    std::vector<int> labels(s.n, 0);
    for (std::size_t i = 0; i < s.n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < exemplars.size(); ++c) {
            const double v = s(i, exemplars[c]);
            if (v > best) {
                best = v;
                labels[i] = static_cast<int>(c);
            }
        }
    }
    for (std::size_t c = 0; c < exemplars.size(); ++c) {
        labels[exemplars[c]] = static_cast<int>(c);
    }
    return labels;
}

// Points with identical similarity rows are indistinguishable; when several
// of them end up as exemplars only the first is kept.
std::vector<std::size_t> drop_duplicate_exemplars(const SimilarityMatrix& s,
                                                  const std::vector<std::size_t>& exemplars) {
    auto same = [&](std::size_t i, std::size_t j) {
        if (s(i, j) != s(j, i)) {
            return false;
        }
        for (std::size_t m = 0; m < s.n; ++m) {
            if (m != i && m != j && (s(i, m) != s(j, m) || s(m, i) != s(m, j))) {
                return false;
            }
        }
        return true;
    };
    std::vector<std::size_t> kept;
    for (const std::size_t e : exemplars) {
        if (std::none_of(kept.begin(), kept.end(), [&](std::size_t k) { return same(k, e); })) {
            kept.push_back(e);
        }
    }
    return kept;
}

// Degenerate input where every off-diagonal similarity is the same value.
std::optional<AffinityResult> equal_similarities(const SimilarityMatrix& s) {
    const double first = s(0, 1);
    double pref_min = std::numeric_limits<double>::infinity();
    double pref_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.n; ++i) {
        pref_min = std::min(pref_min, s(i, i));
        pref_max = std::max(pref_max, s(i, i));
        for (std::size_t j = 0; j < s.n; ++j) {
            if (i != j && s(i, j) != first) {
                return std::nullopt;
            }
        }
    }
    AffinityResult out;
    if (pref_max <= first) {
        out.exemplars = {0};
        out.labels.assign(s.n, 0);
        return out;
    }
    if (pref_min > first) {
        for (std::size_t i = 0; i < s.n; ++i) {
            out.exemplars.push_back(i);
            out.labels.push_back(static_cast<int>(i));
        }
        return out;
    }
    return std::nullopt;
}

}  // namespace

AffinityResult affinity_propagation(const SimilarityMatrix& s, const AffinityConfig& config) {
    const std::size_t n = s.n;
    if (n < 2) {
        throw Error("affinity propagation needs at least 2 points");
    }
    if (!(config.damping >= 0.5 && config.damping < 1.0)) {
        throw Error("damping must lie in [0.5, 1)");
    }
    if (config.max_iterations < 1 || config.convergence_iterations < 1) {
        throw Error("iteration limits must be >= 1");
    }
    if (auto degenerate = equal_similarities(s)) {
        return *degenerate;
    }

    const double lambda = config.damping;
    std::vector<double> r(n * n, 0.0);
    std::vector<double> a(n * n, 0.0);
    std::vector<double> colsum(n, 0.0);
    std::vector<char> exemplar(n, 0);
    std::vector<char> previous(n, 0);
    std::size_t streak = 0;

    AffinityResult out;
    out.converged = false;
    for (std::size_t it = 0; it < config.max_iterations; ++it) {
        out.iterations = it + 1;
        for (std::size_t i = 0; i < n; ++i) {
            const double* si = &s.s[i * n];
            double* ri = &r[i * n];
            const double* ai = &a[i * n];
            double max1 = -std::numeric_limits<double>::infinity();
            double max2 = max1;
            std::size_t arg1 = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const double v = ai[k] + si[k];
                if (v > max1) {
                    max2 = max1;
                    max1 = v;
                    arg1 = k;
                } else if (v > max2) {
                    max2 = v;
                }
            }
            for (std::size_t k = 0; k < n; ++k) {
                const double fresh = si[k] - (k == arg1 ? max2 : max1);
                ri[k] = lambda * ri[k] + (1.0 - lambda) * fresh;
            }
        }

        std::fill(colsum.begin(), colsum.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* ri = &r[i * n];
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i) {
                    colsum[k] += std::max(0.0, ri[k]);
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double* ri = &r[i * n];
            double* ai = &a[i * n];
            for (std::size_t k = 0; k < n; ++k) {
                const double fresh = k == i ? colsum[k]
                                            : std::min(0.0, r[k * n + k] + colsum[k] - std::max(0.0, ri[k]));
                ai[k] = lambda * ai[k] + (1.0 - lambda) * fresh;
            }
        }

        std::size_t count = 0;
        for (std::size_t k = 0; k < n; ++k) {
            exemplar[k] = (a[k * n + k] + r[k * n + k]) > 0.0;
            count += static_cast<std::size_t>(exemplar[k]);
        }
        streak = (it > 0 && exemplar == previous) ? streak + 1 : 1;
        previous = exemplar;
        if (streak >= config.convergence_iterations && count > 0) {
            out.converged = true;
            break;
        }
    }

    std::vector<std::size_t> exemplars;
    for (std::size_t k = 0; k < n; ++k) {
        if (exemplar[k]) {
            exemplars.push_back(k);
        }
    }
    if (exemplars.empty()) {
        // No point claims itself; fall back to the strongest self-evidence.
        std::size_t best = 0;
        for (std::size_t k = 1; k < n; ++k) {
            if (a[k * n + k] + r[k * n + k] > a[best * n + best] + r[best * n + best]) {
                best = k;
            }
        }
        exemplars.push_back(best);
        out.converged = false;
    }

    exemplars = drop_duplicate_exemplars(s, exemplars);

    // Refine each cluster's exemplar to the member with the largest summed
    // similarity to the rest of the cluster, then reassign.
    std::vector<int> labels = assign_to_exemplars(s, exemplars);
    std::vector<std::size_t> refined;
    for (std::size_t c = 0; c < exemplars.size(); ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == static_cast<int>(c)) {
                members.push_back(i);
            }
        }
        std::size_t best = exemplars[c];
        double best_sum = -std::numeric_limits<double>::infinity();
        for (const std::size_t j : members) {
            double sum = 0.0;
            for (const std::size_t i : members) {
                sum += s(i, j);
            }
            if (sum > best_sum) {
                best_sum = sum;
                best = j;
            }
        }
        refined.push_back(best);
    }
    std::sort(refined.begin(), refined.end());
    out.exemplars = drop_duplicate_exemplars(s, refined);
    out.labels = assign_to_exemplars(s, out.exemplars);
    return out;
}

std::size_t relabel_contiguous(std::vector<int>& labels) {
    std::unordered_map<int, int> mapping;
    for (int& l : labels) {
        const auto [it, inserted] = mapping.try_emplace(l, static_cast<int>(mapping.size()));
        l = it->second;
    }
    return mapping.size();
}

JointClustering joint_cluster(const EmbeddingMatrix& earlier, const EmbeddingMatrix& later,
                              ClusterMethod method, const JointClusterConfig& config) {
    if (earlier.empty()) {
        throw Error("word absent in period " + earlier.period);
    }
    if (later.empty()) {
        throw Error("word absent in period " + later.period);
    }
    Matrix pooled = stack_rows(earlier, later);
    if (config.normalize) {
        normalize_rows(pooled);
    }

    JointClustering out;
    out.method = method;
    std::vector<int> labels;
    if (method == ClusterMethod::kmeans) {
        labels = kmeans(pooled, config.kmeans).labels;
    } else {
        SimilarityMatrix sims = negative_squared_euclidean_similarities(pooled);
        fill_preference(sims, config.affinity);
        AffinityResult ap = affinity_propagation(sims, config.affinity);
        out.converged = ap.converged;
        labels = std::move(ap.labels);
    }
    out.k = relabel_contiguous(labels);
    const auto split = labels.begin() + static_cast<std::ptrdiff_t>(earlier.rows);
    out.labels_earlier.assign(labels.begin(), split);
    out.labels_later.assign(split, labels.end());
    return out;
}

}  // namespace semchange
