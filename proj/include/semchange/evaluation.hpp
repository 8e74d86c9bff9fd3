#pragma once

#include "semchange/measures.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace semchange {

// One annotated word. compare is the mean cross-period relatedness on the
// 1 (unrelated) .. 4 (identical) scale.
struct GoldRecord {
    std::string lemma;
    double delta_later = 0.0;
    double compare = 0.0;
    double agreement = 0.0;
};

enum class GoldMeasure { delta_later, compare };

std::string to_string(GoldMeasure measure);

// Tab-separated with a header naming word, delta_later, compare and
// agreement in any order; other columns are ignored.
std::vector<GoldRecord> parse_gold(std::istream& in);
std::vector<GoldRecord> load_gold(const std::filesystem::path& path);

// Keeps records with agreement >= threshold, preserving order.
std::vector<GoldRecord> filter_by_agreement(std::span<const GoldRecord> records, double threshold = 0.2);

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

struct SpearmanOptions {
    // Exact enumeration of all n! permutations up to this n.
    std::size_t exact_limit = 8;
    std::size_t permutations = 100000;
    std::uint64_t seed = 0;
};

struct SpearmanResult {
    double rho = 0.0;
    double p_value = 1.0;
};

// Pearson correlation of average ranks, with a two-sided permutation
// p-value: P(|rho_perm| >= |rho|).
SpearmanResult spearman(std::span<const double> x, std::span<const double> y,
                        const SpearmanOptions& options = {});

// Rank correlation only, without the permutation test.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct CorrelationResult {
    Method method = Method::prt;
    GoldMeasure measure = GoldMeasure::delta_later;
    double rho = 0.0;
    double p_value = 1.0;
    bool significant = false;
    std::size_t n = 0;
};

struct EvaluationOptions {
    double alpha = 0.05;
    SpearmanOptions spearman;
};

struct Evaluation {
    std::vector<CorrelationResult> results;
    std::vector<std::string> missing_from_gold;  // scored lemmas without a gold record
    std::vector<std::string> unscored;           // gold lemmas without a score
};

// One result per (method, gold measure). COMPARE is correlated as
// 1 - compare, since a lower COMPARE means stronger change.
Evaluation evaluate(std::span<const ChangeScore> scores, std::span<const GoldRecord> gold,
                    const EvaluationOptions& options = {});

// A column of the report: the results of one embedding model.
struct ReportColumn {
    std::string model;
    std::vector<CorrelationResult> results;
};

// Rows are method x measure in canonical order. Significant rhos carry '*';
// the best rho per (column, measure) is bracketed in the text table and
// flagged best=1 in the TSV.
std::string report_text(std::span<const ReportColumn> columns);
std::string report_tsv(std::span<const ReportColumn> columns);

}  // namespace semchange
