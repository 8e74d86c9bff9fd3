#pragma once

#include "semchange/embedding_store.hpp"
#include "semchange/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace semchange {

enum class ClusterMethod { kmeans, affinity };

std::string to_string(ClusterMethod method);

struct KMeansConfig {
    std::size_t k = 5;
    std::size_t restarts = 10;
    std::size_t max_iterations = 300;
    // Stop once the summed squared centroid movement drops to this value.
    double tolerance = 1e-12;
    std::uint64_t seed = 0;
};

struct KMeansResult {
    std::vector<int> labels;
    Matrix centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
    // Inertia after each assignment step of the winning run, plus the final
    // value after point transfers when those improved it.
    std::vector<double> inertia_trace;
};

// Lloyd iterations from k-means++ seeding, then single-point transfers that
// still lower inertia; best of `restarts` runs by inertia. An empty cluster is reseeded at the point farthest from its
// centroid, so every label in [0, k) stays in use whenever the points allow.
KMeansResult kmeans(const Matrix& points, const KMeansConfig& config);

struct AffinityConfig {
    double damping = 0.9;
    // nullopt: median of the off-diagonal similarities.
    std::optional<double> preference;
    std::size_t max_iterations = 1000;
    std::size_t convergence_iterations = 50;
};

struct AffinityResult {
    std::vector<int> labels;          // cluster index per point, 0..K-1
    std::vector<std::size_t> exemplars;  // point index of each cluster's exemplar
    std::size_t iterations = 0;
    bool converged = true;
};

double median_off_diagonal(const SimilarityMatrix& sims);

// Writes the configured preference (or the off-diagonal median) onto the diagonal.
void fill_preference(SimilarityMatrix& sims, const AffinityConfig& config);

// Dense responsibility/availability message passing. Reads the preferences
// from the diagonal of `sims`. When the exemplar set does not settle within
// max_iterations the current assignment is returned with converged = false.
AffinityResult affinity_propagation(const SimilarityMatrix& sims, const AffinityConfig& config);

struct JointClustering {
    std::vector<int> labels_earlier;
    std::vector<int> labels_later;
    std::size_t k = 0;
    ClusterMethod method = ClusterMethod::kmeans;
    bool converged = true;
};

struct JointClusterConfig {
    KMeansConfig kmeans;
    AffinityConfig affinity;
    bool normalize = false;
};

// Clusters the pooled usages of both periods once and splits the labels back
// by period, relabelled to 0..K-1 in order of first appearance.
JointClustering joint_cluster(const EmbeddingMatrix& earlier, const EmbeddingMatrix& later,
                              ClusterMethod method, const JointClusterConfig& config);

// Maps labels onto 0..K-1 in order of first appearance; returns K.
std::size_t relabel_contiguous(std::vector<int>& labels);

}  // namespace semchange
