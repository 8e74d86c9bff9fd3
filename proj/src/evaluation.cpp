#include "semchange/evaluation.hpp"

#include "semchange/error.hpp"
#include "semchange/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace semchange {

std::string to_string(GoldMeasure measure) {
    return measure == GoldMeasure::delta_later ? "delta-later" : "compare";
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) {
            break;
        }
        start = tab + 1;
    }
    return fields;
}

double parse_number(const std::string& field, const std::string& column, std::size_t line) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw Error("line " + std::to_string(line) + ": unparsable number in column " + column + ": '" +
                    field + "'");
    }
    return value;
}

}  // namespace

std::vector<GoldRecord> parse_gold(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            header = split_tabs(line);
            break;
        }
    }
    if (header.empty()) {
        throw Error("gold file has no header row");
    }
    if (header.front().rfind("\xEF\xBB\xBF", 0) == 0) {
        header.front().erase(0, 3);
    }
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error("missing column: " + name);
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_word = column("word");
    const std::size_t c_delta = column("delta_later");
    const std::size_t c_compare = column("compare");
    const std::size_t c_agreement = column("agreement");

    std::vector<GoldRecord> records;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_tabs(line);
        if (fields.size() != header.size()) {
            throw Error("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
        }
        GoldRecord r;
        r.lemma = fields[c_word];
        if (r.lemma.empty()) {
            throw Error("line " + std::to_string(line_no) + ": empty word");
        }
        r.delta_later = parse_number(fields[c_delta], "delta_later", line_no);
        r.compare = parse_number(fields[c_compare], "compare", line_no);
        r.agreement = parse_number(fields[c_agreement], "agreement", line_no);
        if (r.compare < 1.0 || r.compare > 4.0) {
            throw Error("line " + std::to_string(line_no) + ": compare out of range [1, 4]: " +
                        fields[c_compare]);
        }
        if (!seen.insert(r.lemma).second) {
            throw Error("line " + std::to_string(line_no) + ": duplicate lemma " + r.lemma);
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<GoldRecord> load_gold(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return parse_gold(in);
}

std::vector<GoldRecord> filter_by_agreement(std::span<const GoldRecord> records, double threshold) {
    std::vector<GoldRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [&](const GoldRecord& r) { return r.agreement >= threshold; });
    return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) {
            ranks[order[t]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

namespace {

struct CenteredRanks {
    std::vector<double> x;
    std::vector<double> y;
    double denom = 0.0;
};

CenteredRanks centered_ranks(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error("length mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    }
    if (x.size() < 3) {
        throw Error("spearman needs at least 3 pairs");
    }
    CenteredRanks c{average_ranks(x), average_ranks(y), 0.0};
    const double mean = 0.5 * static_cast<double>(x.size() + 1);
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        c.x[i] -= mean;
        c.y[i] -= mean;
        sxx += c.x[i] * c.x[i];
        syy += c.y[i] * c.y[i];
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw Error("zero rank variance");
    }
    c.denom = std::sqrt(sxx * syy);
    return c;
}

double correlate(const std::vector<double>& x, const std::vector<double>& y, double denom) {
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += x[i] * y[i];
    }
    return std::clamp(sxy / denom, -1.0, 1.0);
}

}  // namespace

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    const CenteredRanks c = centered_ranks(x, y);
    return correlate(c.x, c.y, c.denom);
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y, const SpearmanOptions& options) {
    const CenteredRanks c = centered_ranks(x, y);
    SpearmanResult out;
    out.rho = correlate(c.x, c.y, c.denom);
    // Permuted statistics equal to the observed one up to round-off count as
    // at least as extreme.
    const double threshold = std::abs(out.rho) - 1e-12;
    const std::size_t n = c.x.size();

    if (n <= options.exact_limit) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::vector<double> shuffled(n);
        std::uint64_t total = 0;
        std::uint64_t extreme = 0;
        do {
            for (std::size_t i = 0; i < n; ++i) {
                shuffled[i] = c.y[perm[i]];
            }
            ++total;
            extreme += std::abs(correlate(c.x, shuffled, c.denom)) >= threshold;
        } while (std::next_permutation(perm.begin(), perm.end()));
        out.p_value = static_cast<double>(extreme) / static_cast<double>(total);
        return out;
    }

    if (options.permutations == 0) {
        throw Error("permutation count must be >= 1");
    }
    Rng rng(options.seed);
    std::vector<double> shuffled = c.y;
    std::uint64_t extreme = 0;
    for (std::size_t b = 0; b < options.permutations; ++b) {
        for (std::size_t i = n - 1; i > 0; --i) {
            std::swap(shuffled[i], shuffled[static_cast<std::size_t>(uniform_below(rng, i + 1))]);
        }
        extreme += std::abs(correlate(c.x, shuffled, c.denom)) >= threshold;
    }
    out.p_value = static_cast<double>(extreme + 1) / static_cast<double>(options.permutations + 1);
    return out;
}

Evaluation evaluate(std::span<const ChangeScore> scores, std::span<const GoldRecord> gold,
                    const EvaluationOptions& options) {
    std::map<std::string, const GoldRecord*> by_lemma;
    for (const auto& g : gold) {
        by_lemma[g.lemma] = &g;
    }

    std::map<Method, std::map<std::string, const ChangeScore*>> by_method;
    for (const auto& s : scores) {
        auto& bucket = by_method[s.method];
        if (!bucket.empty()) {
            const ChangeScore* first = bucket.begin()->second;
            if (first->earlier != s.earlier || first->later != s.later) {
                throw Error("mixed period pairs for method " + to_string(s.method));
            }
        }
        if (!bucket.emplace(s.lemma, &s).second) {
            throw Error("duplicate score for " + s.lemma + " / " + to_string(s.method));
        }
    }

    Evaluation out;
    std::set<std::string> scored;
    for (const auto& s : scores) {
        scored.insert(s.lemma);
    }
    for (const auto& lemma : scored) {
        if (!by_lemma.contains(lemma)) {
            out.missing_from_gold.push_back(lemma);
        }
    }
    for (const auto& [lemma, record] : by_lemma) {
        if (!scored.contains(lemma)) {
            out.unscored.push_back(lemma);
        }
    }

    for (const Method method : kAllMethods) {
        const auto it = by_method.find(method);
        if (it == by_method.end()) {
            continue;
        }
        std::vector<double> values;
        std::vector<double> delta;
        std::vector<double> inverted_compare;
        for (const auto& [lemma, score] : it->second) {
            const auto g = by_lemma.find(lemma);
            if (g == by_lemma.end()) {
                continue;
            }
            values.push_back(score->value);
            delta.push_back(g->second->delta_later);
            inverted_compare.push_back(1.0 - g->second->compare);
        }
        if (values.size() < 3) {
            throw Error("lemma intersection < 3 for method " + to_string(method) + " (" +
                        std::to_string(values.size()) + " shared words)");
        }
        for (const GoldMeasure measure : {GoldMeasure::delta_later, GoldMeasure::compare}) {
            SpearmanOptions sp = options.spearman;
            sp.seed = mix_seed(mix_seed(sp.seed, static_cast<std::uint64_t>(method)),
                               static_cast<std::uint64_t>(measure));
            const auto r = spearman(values, measure == GoldMeasure::delta_later ? delta : inverted_compare, sp);
            out.results.push_back(CorrelationResult{method, measure, r.rho, r.p_value,
                                                    r.p_value < options.alpha, values.size()});
        }
    }
    return out;
}

namespace {

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

struct Cell {
    const CorrelationResult* result = nullptr;
    bool best = false;
};

// rows[method][measure][column]
using Grid = std::map<std::pair<Method, GoldMeasure>, std::vector<Cell>>;

Grid build_grid(std::span<const ReportColumn> columns) {
    Grid grid;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        for (const auto& r : columns[c].results) {
            auto& row = grid[{r.method, r.measure}];
            row.resize(columns.size());
            row[c].result = &r;
        }
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
        for (const GoldMeasure measure : {GoldMeasure::delta_later, GoldMeasure::compare}) {
            Cell* best = nullptr;
            for (const Method method : kAllMethods) {
                const auto it = grid.find({method, measure});
                if (it == grid.end() || it->second[c].result == nullptr) {
                    continue;
                }
                Cell& cell = it->second[c];
                if (best == nullptr || cell.result->rho > best->result->rho) {
                    best = &cell;
                }
            }
            if (best != nullptr) {
                best->best = true;
            }
        }
    }
    return grid;
}

}  // namespace

std::string report_text(std::span<const ReportColumn> columns) {
    const Grid grid = build_grid(columns);
    std::ostringstream os;
    os << std::left << std::setw(14) << "Algorithms" << std::setw(13) << "Measure";
    for (const auto& col : columns) {
        os << std::setw(12) << col.model;
    }
    os << "\n";
    for (const Method method : kAllMethods) {
        bool first = true;
        for (const GoldMeasure measure : {GoldMeasure::delta_later, GoldMeasure::compare}) {
            const auto it = grid.find({method, measure});
            if (it == grid.end()) {
                continue;
            }
            os << std::setw(14) << (first ? to_string(method) : "") << std::setw(13) << to_string(measure);
            first = false;
            for (const Cell& cell : it->second) {
                std::string text = "-";
                if (cell.result != nullptr) {
                    text = fixed(cell.result->rho, 3) + (cell.result->significant ? "*" : "");
                    if (cell.best) {
                        text = "[" + text + "]";
                    }
                }
                os << std::setw(12) << text;
            }
            os << "\n";
        }
    }
    return os.str();
}

std::string report_tsv(std::span<const ReportColumn> columns) {
    const Grid grid = build_grid(columns);
    std::ostringstream os;
    os << "method\tmeasure\tmodel\trho\tp_value\tsignificant\tbest\tn\n";
    for (const auto& [key, row] : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            const Cell& cell = row[c];
            if (cell.result == nullptr) {
                continue;
            }
            const auto& r = *cell.result;
            os << to_string(r.method) << '\t' << to_string(r.measure) << '\t' << columns[c].model << '\t'
               << fixed(r.rho, 9) << '\t' << fixed(r.p_value, 9) << '\t' << (r.significant ? 1 : 0) << '\t'
               << (cell.best ? 1 : 0) << '\t' << r.n << '\n';
        }
    }
    return os.str();
}

}  // namespace semchange
