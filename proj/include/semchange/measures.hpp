#pragma once

#include "semchange/clustering.hpp"
#include "semchange/embedding_store.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace semchange {

enum class Method { prt, affinity_jsd, kmeans_jsd, kmeans_ms };

inline constexpr Method kAllMethods[] = {Method::prt, Method::affinity_jsd, Method::kmeans_jsd,
                                         Method::kmeans_ms};

std::string to_string(Method method);
Method parse_method(const std::string& name);

// Share of a word's usages falling into each cluster.
struct UsageDistribution {
    std::vector<double> p;
    std::size_t size() const { return p.size(); }
};

struct ChangeScore {
    std::string lemma;
    Method method = Method::prt;
    std::string earlier;
    std::string later;
    double value = 0.0;
};

// Cosine distance between the two period prototypes (row means).
double prt(const EmbeddingMatrix& earlier, const EmbeddingMatrix& later);

UsageDistribution usage_distribution(std::span<const int> labels, std::size_t k);

// Square root of the base-2 Jensen-Shannon divergence, in [0, 1].
double jsd(const UsageDistribution& p, const UsageDistribution& q);

// max_k (p[k] - q[k])^2, in [0, 1].
double max_square(const UsageDistribution& p, const UsageDistribution& q);

struct ScoringConfig {
    std::size_t sampling_cap = 10000;
    JointClusterConfig clustering;
    std::uint64_t seed = 0;
};

// What happened while scoring one word; consumed by the CLI trace log.
struct WordTrace {
    struct PeriodUsage {
        std::string period;
        std::size_t available = 0;
        std::size_t used = 0;
    };
    std::string lemma;
    PeriodUsage earlier;
    PeriodUsage later;
    std::optional<std::size_t> kmeans_clusters;
    std::optional<std::size_t> affinity_clusters;
    bool affinity_converged = true;
};

// Scores one word with every requested method. The sampling cap applies to
// each period separately. k-Means JSD and MS share one joint clustering.
// Seeds are derived from (config.seed, lemma) so results do not depend on
// which other words are scored or in what order.
std::vector<ChangeScore> score_word(const Bundle& bundle, const std::string& lemma,
                                    const std::string& earlier, const std::string& later,
                                    std::span<const Method> methods, const ScoringConfig& config,
                                    WordTrace* trace = nullptr);

ChangeScore score_word(const Bundle& bundle, const std::string& lemma, const std::string& earlier,
                       const std::string& later, Method method, const ScoringConfig& config);

// Same pipeline on matrices already in memory (no sampling cap applied).
std::vector<ChangeScore> score_matrices(const EmbeddingMatrix& earlier, const EmbeddingMatrix& later,
                                        std::span<const Method> methods, const ScoringConfig& config,
                                        WordTrace* trace = nullptr);

// Score file: header "lemma method earlier later value" (tab-separated),
// values with 9 decimals.
std::string format_scores(std::span<const ChangeScore> scores);
std::vector<ChangeScore> parse_scores(std::istream& in);

// Descending by value, ties by lemma. All scores must share one method and
// period pair.
std::vector<ChangeScore> rank_words(std::vector<ChangeScore> scores);

}  // namespace semchange
