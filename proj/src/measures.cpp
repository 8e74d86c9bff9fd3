#include "semchange/measures.hpp"

#include "semchange/error.hpp"
#include "semchange/numerics.hpp"
#include "semchange/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <sstream>

namespace semchange {

std::string to_string(Method method) {
    switch (method) {
    case Method::prt:
        return "prt";
    case Method::affinity_jsd:
        return "affinity-jsd";
    case Method::kmeans_jsd:
        return "kmeans-jsd";
    case Method::kmeans_ms:
        return "kmeans-ms";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    for (const Method m : kAllMethods) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw Error("unknown method: " + name);
}

double prt(const EmbeddingMatrix& earlier, const EmbeddingMatrix& later) {
    if (earlier.empty()) {
        throw Error("word absent in period " + earlier.period);
    }
    if (later.empty()) {
        throw Error("word absent in period " + later.period);
    }
    return cosine_distance(mean_vector(earlier), mean_vector(later));
}

UsageDistribution usage_distribution(std::span<const int> labels, std::size_t k) {
    if (labels.empty()) {
        throw Error("word absent in period");
    }
    if (k == 0) {
        throw Error("cluster count must be >= 1");
    }
    UsageDistribution out{std::vector<double>(k, 0.0)};
    for (const int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= k) {
            throw Error("label " + std::to_string(l) + " outside [0, " + std::to_string(k) + ")");
        }
        out.p[static_cast<std::size_t>(l)] += 1.0;
    }
    for (double& x : out.p) {
        x /= static_cast<double>(labels.size());
    }
    return out;
}

namespace {

void check_lengths(const UsageDistribution& p, const UsageDistribution& q) {
    if (p.size() != q.size()) {
        throw Error("length mismatch: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
    }
}

// KL(p || m) in bits, with 0 log 0 = 0.
double kl_bits(const std::vector<double>& p, const std::vector<double>& m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            acc += p[i] * std::log2(p[i] / m[i]);
        }
    }
    return acc;
}

}  // namespace

double jsd(const UsageDistribution& p, const UsageDistribution& q) {
    check_lengths(p, q);
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = 0.5 * (p.p[i] + q.p[i]);
    }
    const double divergence = 0.5 * (kl_bits(p.p, m) + kl_bits(q.p, m));
    return std::clamp(std::sqrt(std::max(0.0, divergence)), 0.0, 1.0);
}

double max_square(const UsageDistribution& p, const UsageDistribution& q) {
    check_lengths(p, q);
    double best = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p.p[i] - q.p[i];
        best = std::max(best, d * d);
    }
    return best;
}

namespace {

std::uint64_t lemma_seed(std::uint64_t seed, const std::string& lemma) {
    return mix_seed(seed, fnv1a(lemma));
}

}  // namespace

std::vector<ChangeScore> score_matrices(const EmbeddingMatrix& earlier, const EmbeddingMatrix& later,
                                        std::span<const Method> methods, const ScoringConfig& config,
                                        WordTrace* trace) {
    if (earlier.empty()) {
        throw Error("word absent in period " + earlier.period);
    }
    if (later.empty()) {
        throw Error("word absent in period " + later.period);
    }
    const std::uint64_t base = lemma_seed(config.seed, earlier.lemma);

    std::optional<JointClustering> kmeans_run;
    std::optional<JointClustering> affinity_run;
    auto clustering = [&](ClusterMethod cm) -> const JointClustering& {
        auto& slot = cm == ClusterMethod::kmeans ? kmeans_run : affinity_run;
        if (!slot) {
            JointClusterConfig cfg = config.clustering;
            cfg.kmeans.seed = mix_seed(base, fnv1a("kmeans"));
            slot = joint_cluster(earlier, later, cm, cfg);
            if (trace != nullptr) {
                if (cm == ClusterMethod::kmeans) {
                    trace->kmeans_clusters = slot->k;
                } else {
                    trace->affinity_clusters = slot->k;
                    trace->affinity_converged = slot->converged;
                }
            }
        }
        return *slot;
    };

    std::vector<ChangeScore> out;
    for (const Method method : methods) {
        double value = 0.0;
        if (method == Method::prt) {
            value = prt(earlier, later);
        } else {
            const auto& jc = clustering(method == Method::affinity_jsd ? ClusterMethod::affinity
                                                                       : ClusterMethod::kmeans);
            const auto p = usage_distribution(jc.labels_earlier, jc.k);
            const auto q = usage_distribution(jc.labels_later, jc.k);
            value = method == Method::kmeans_ms ? max_square(p, q) : jsd(p, q);
        }
        out.push_back(ChangeScore{earlier.lemma, method, earlier.period, later.period, value});
    }
    return out;
}

std::vector<ChangeScore> score_word(const Bundle& bundle, const std::string& lemma,
                                    const std::string& earlier, const std::string& later,
                                    std::span<const Method> methods, const ScoringConfig& config,
                                    WordTrace* trace) {
    try {
        const std::uint64_t base = lemma_seed(config.seed, lemma);
        const EmbeddingMatrix full_t = bundle.read(lemma, earlier);
        const EmbeddingMatrix full_t1 = bundle.read(lemma, later);
        const EmbeddingMatrix m_t = sample_usages(full_t, config.sampling_cap, mix_seed(base, fnv1a(earlier)));
        const EmbeddingMatrix m_t1 = sample_usages(full_t1, config.sampling_cap, mix_seed(base, fnv1a(later)));
        if (trace != nullptr) {
            trace->lemma = lemma;
            trace->earlier = {earlier, full_t.rows, m_t.rows};
            trace->later = {later, full_t1.rows, m_t1.rows};
        }
        return score_matrices(m_t, m_t1, methods, config, trace);
    } catch (const Error& e) {
        throw Error(lemma + ": " + e.what());
    }
}

ChangeScore score_word(const Bundle& bundle, const std::string& lemma, const std::string& earlier,
                       const std::string& later, Method method, const ScoringConfig& config) {
    const Method methods[] = {method};
    return score_word(bundle, lemma, earlier, later, methods, config).front();
}

std::string format_scores(std::span<const ChangeScore> scores) {
    std::ostringstream os;
    os << "lemma\tmethod\tearlier\tlater\tvalue\n" << std::fixed << std::setprecision(9);
    for (const auto& s : scores) {
        os << s.lemma << '\t' << to_string(s.method) << '\t' << s.earlier << '\t' << s.later << '\t' << s.value
           << '\n';
    }
    return os.str();
}

std::vector<ChangeScore> parse_scores(std::istream& in) {
    std::vector<ChangeScore> out;
    std::string line;
    std::size_t line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, '\t');) {
            fields.push_back(f);
        }
        if (header) {
            header = false;
            if (fields.size() >= 5 && fields[0] == "lemma" && fields[4] == "value") {
                continue;
            }
        }
        if (fields.size() != 5) {
            throw Error("score line " + std::to_string(line_no) + ": expected 5 fields");
        }
        ChangeScore s{fields[0], parse_method(fields[1]), fields[2], fields[3], 0.0};
        const char* last = fields[4].data() + fields[4].size();
        const auto [ptr, ec] = std::from_chars(fields[4].data(), last, s.value);
        if (fields[4].empty() || ec != std::errc() || ptr != last) {
            throw Error("score line " + std::to_string(line_no) + ": unparsable value '" + fields[4] + "'");
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ChangeScore> rank_words(std::vector<ChangeScore> scores) {
    for (const auto& s : scores) {
        if (s.method != scores.front().method) {
            throw Error("mixed methods: " + to_string(s.method) + " and " + to_string(scores.front().method));
        }
        if (s.earlier != scores.front().earlier || s.later != scores.front().later) {
            throw Error("mixed period pairs");
        }
    }
    std::sort(scores.begin(), scores.end(), [](const ChangeScore& a, const ChangeScore& b) {
        if (a.value != b.value) {
            return a.value > b.value;
        }
        return a.lemma < b.lemma;
    });
    return scores;
}

}  // namespace semchange
