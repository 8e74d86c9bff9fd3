#include "semchange/cli.hpp"

#include "semchange/embedding_store.hpp"
#include "semchange/error.hpp"
#include "semchange/evaluation.hpp"
#include "semchange/measures.hpp"
#include "semchange/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace semchange::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

// Writes to `path`, or to `out` when path is empty.
void emit(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    file << text;
    if (!file) {
        throw Error("write failed: " + path);
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, sep);) {
        if (!part.empty()) {
            parts.push_back(part);
        }
    }
    return parts;
}

std::vector<ChangeScore> read_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path);
    }
    return parse_scores(in);
}

// ---- validate -------------------------------------------------------------

struct ValidateArgs {
    std::string bundle;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
    if (!fs::is_directory(a.bundle)) {
        err << "validate: no such bundle directory: " << a.bundle << "\n"
            << "usage: semchange validate <bundle-dir>\n";
        return kUsageError;
    }
    std::vector<Violation> violations;
    try {
        violations = validate_bundle(a.bundle);
    } catch (const Error& e) {
        err << "validate: " << e.what() << "\n";
        return kDataViolation;
    }
    for (const auto& v : violations) {
        out << v.where << '\t' << v.message << '\n';
    }
    return violations.empty() ? kOk : kDataViolation;
}

// ---- score ----------------------------------------------------------------

struct ScoreArgs {
    std::string bundle;
    std::string earlier;
    std::string later;
    std::string methods = "prt,affinity-jsd,kmeans-jsd,kmeans-ms";
    std::size_t cap = 10000;
    std::size_t k = 5;
    std::size_t restarts = 10;
    double damping = 0.9;
    std::string preference = "median";
    bool normalize = false;
    std::string output;
    std::string skip_log;
    std::string trace;
};

struct WordOutcome {
    std::vector<ChangeScore> scores;
    WordTrace trace;
    std::string skip_reason;
};

std::string format_trace(const std::vector<WordOutcome>& outcomes) {
    std::ostringstream os;
    os << "lemma\tearlier\tearlier_available\tearlier_used\tlater\tlater_available\tlater_used\t"
          "kmeans_k\taffinity_k\taffinity_converged\n";
    auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("-"); };
    for (const auto& o : outcomes) {
        if (!o.skip_reason.empty()) {
            continue;
        }
        const WordTrace& t = o.trace;
        os << t.lemma << '\t' << t.earlier.period << '\t' << t.earlier.available << '\t' << t.earlier.used << '\t'
           << t.later.period << '\t' << t.later.available << '\t' << t.later.used << '\t' << opt(t.kmeans_clusters)
           << '\t' << opt(t.affinity_clusters) << '\t'
           << (t.affinity_clusters ? (t.affinity_converged ? "1" : "0") : "-") << '\n';
    }
    return os.str();
}

int cmd_score(const ScoreArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    if (!fs::is_directory(a.bundle)) {
        err << "score: no such bundle directory: " << a.bundle << "\n";
        return kUsageError;
    }
    std::vector<Method> methods;
    ScoringConfig config;
    try {
        for (const auto& name : split(a.methods, ',')) {
            methods.push_back(parse_method(name));
        }
        if (a.preference != "median") {
            double pref = 0.0;
            const auto* last = a.preference.data() + a.preference.size();
            const auto [ptr, ec] = std::from_chars(a.preference.data(), last, pref);
            if (ec != std::errc() || ptr != last) {
                throw Error("--preference must be 'median' or a number");
            }
            config.clustering.affinity.preference = pref;
        }
    } catch (const Error& e) {
        err << "score: " << e.what() << "\n";
        return kUsageError;
    }
    if (methods.empty()) {
        err << "score: no methods selected\n";
        return kUsageError;
    }
    config.sampling_cap = a.cap;
    config.seed = g.seed;
    config.clustering.kmeans.k = a.k;
    config.clustering.kmeans.restarts = a.restarts;
    config.clustering.affinity.damping = a.damping;
    config.clustering.normalize = a.normalize;

    Bundle bundle;
    try {
        bundle = Bundle::open(a.bundle);
    } catch (const Error& e) {
        err << "score: " << e.what() << "\n";
        return kDataViolation;
    }
    const auto& periods = bundle.manifest().periods;
    const std::string earlier = !a.earlier.empty() ? a.earlier : (periods.size() > 0 ? periods[0] : "");
    const std::string later = !a.later.empty() ? a.later : (periods.size() > 1 ? periods[1] : "");
    for (const auto& p : {earlier, later}) {
        if (!bundle.has_period(p)) {
            err << "score: period '" << p << "' not declared in manifest\n";
            return kUsageError;
        }
    }

    std::vector<std::string> lemmas;
    for (const auto& w : bundle.manifest().words) {
        lemmas.push_back(w.lemma);
    }
    std::sort(lemmas.begin(), lemmas.end());

    std::vector<WordOutcome> outcomes(lemmas.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < lemmas.size(); i = next++) {
            WordOutcome& o = outcomes[i];
            try {
                o.scores = score_word(bundle, lemmas[i], earlier, later, methods, config, &o.trace);
            } catch (const Error& e) {
                o.skip_reason = e.what();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(g.jobs, 1, std::max<std::size_t>(lemmas.size(), 1));
    {
        std::vector<std::jthread> pool;
        for (std::size_t j = 1; j < jobs; ++j) {
            pool.emplace_back(worker);
        }
        worker();
    }

    std::vector<ChangeScore> rows;
    std::ostringstream skips;
    for (std::size_t i = 0; i < lemmas.size(); ++i) {
        if (outcomes[i].skip_reason.empty()) {
            rows.insert(rows.end(), outcomes[i].scores.begin(), outcomes[i].scores.end());
        } else {
            skips << lemmas[i] << '\t' << outcomes[i].skip_reason << '\n';
        }
    }
    try {
        if (!a.skip_log.empty()) {
            emit(skips.str(), a.skip_log, out);
        } else if (!skips.str().empty()) {
            err << skips.str();
        }
        if (!a.trace.empty()) {
            emit(format_trace(outcomes), a.trace, out);
        }
        if (rows.empty()) {
            err << "score: no scorable words\n";
            return kDataViolation;
        }
        emit(format_scores(rows), a.output, out);
    } catch (const Error& e) {
        err << "score: " << e.what() << "\n";
        return kDataViolation;
    }
    return kOk;
}

// ---- rank -----------------------------------------------------------------

struct RankArgs {
    std::string scores;
    std::string method;
    std::string output;
};

int cmd_rank(const RankArgs& a, std::ostream& out, std::ostream& err) {
    try {
        const auto scores = read_scores(a.scores);
        std::optional<Method> only;
        if (!a.method.empty()) {
            only = parse_method(a.method);
        }
        std::ostringstream os;
        os << "rank\tlemma\tmethod\tearlier\tlater\tvalue\n" << std::fixed << std::setprecision(9);
        for (const Method m : kAllMethods) {
            if (only && *only != m) {
                continue;
            }
            std::vector<ChangeScore> subset;
            std::copy_if(scores.begin(), scores.end(), std::back_inserter(subset),
                         [&](const ChangeScore& s) { return s.method == m; });
            const auto ranked = rank_words(std::move(subset));
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                const auto& s = ranked[i];
                os << i + 1 << '\t' << s.lemma << '\t' << to_string(s.method) << '\t' << s.earlier << '\t'
                   << s.later << '\t' << s.value << '\n';
            }
        }
        emit(os.str(), a.output, out);
    } catch (const Error& e) {
        err << "rank: " << e.what() << "\n";
        return kDataViolation;
    }
    return kOk;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    std::vector<std::string> scores;
    std::string gold;
    double alpha = 0.05;
    double agreement_threshold = 0.2;
    std::size_t permutations = 100000;
    std::string format = "text";
    std::string output;
};

int cmd_evaluate(const EvaluateArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    try {
        const auto gold = filter_by_agreement(load_gold(a.gold), a.agreement_threshold);
        EvaluationOptions options;
        options.alpha = a.alpha;
        options.spearman.permutations = a.permutations;
        options.spearman.seed = g.seed;

        std::vector<ReportColumn> columns;
        for (const auto& spec : a.scores) {
            std::string label;
            std::string path = spec;
            if (const auto eq = spec.find('='); eq != std::string::npos && !fs::exists(spec)) {
                label = spec.substr(0, eq);
                path = spec.substr(eq + 1);
            } else {
                label = fs::path(spec).stem().string();
            }
            const auto scores = read_scores(path);
            const Evaluation ev = evaluate(scores, gold, options);
            for (const auto& lemma : ev.missing_from_gold) {
                err << "evaluate: " << label << ": no gold record for " << lemma << "\n";
            }
            for (const auto& lemma : ev.unscored) {
                err << "evaluate: " << label << ": gold word not scored: " << lemma << "\n";
            }
            columns.push_back(ReportColumn{label, ev.results});
        }
        emit(a.format == "tsv" ? report_tsv(columns) : report_text(columns), a.output, out);
    } catch (const Error& e) {
        err << "evaluate: " << e.what() << "\n";
        return kDataViolation;
    }
    return kOk;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    std::string spec;
    std::string output;
    std::string gold;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
    try {
        const SynthSpec spec = load_synth_spec(a.spec);
        const fs::path gold = a.gold.empty() ? fs::path(a.output) / "gold.tsv" : fs::path(a.gold);
        write_synth(spec, a.output, gold);
        out << "wrote " << spec.words.size() << " words to " << a.output << " (gold: " << gold.string() << ")\n";
    } catch (const Error& e) {
        err << "synth: " << e.what() << "\n";
        return kDataViolation;
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semantic change scoring from contextualized token embeddings", "semchange"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Seed for sampling, clustering and permutation tests");
    app.add_option("--jobs", g.jobs, "Words scored in parallel")->check(CLI::PositiveNumber);

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Check a bundle against its manifest");
    validate->add_option("bundle", va.bundle, "Bundle directory")->required();

    ScoreArgs sa;
    auto* score = app.add_subcommand("score", "Score every word of a bundle");
    score->add_option("--bundle", sa.bundle, "Bundle directory")->required();
    score->add_option("--earlier", sa.earlier, "Earlier period (default: first manifest period)");
    score->add_option("--later", sa.later, "Later period (default: second manifest period)");
    score->add_option("--methods", sa.methods, "Comma-separated subset of prt,affinity-jsd,kmeans-jsd,kmeans-ms")
        ->capture_default_str();
    score->add_option("--cap", sa.cap, "Usage sampling cap per (word, period)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    score->add_option("--k", sa.k, "k-Means cluster count")->capture_default_str()->check(CLI::PositiveNumber);
    score->add_option("--restarts", sa.restarts, "k-Means restarts")->capture_default_str()->check(CLI::PositiveNumber);
    score->add_option("--damping", sa.damping, "Affinity Propagation damping")
        ->capture_default_str()
        ->check(CLI::Range(0.5, 0.999999));
    score->add_option("--preference", sa.preference, "AP preference: 'median' or a number")->capture_default_str();
    score->add_flag("--normalize", sa.normalize, "L2-normalize usages before clustering");
    score->add_option("--output,-o", sa.output, "Score TSV (default: stdout)");
    score->add_option("--skip-log", sa.skip_log, "Words that could not be scored (default: stderr)");
    score->add_option("--trace", sa.trace, "Per-word usage and cluster counts");

    RankArgs ra;
    auto* rank = app.add_subcommand("rank", "Rank words by score, per method");
    rank->add_option("--scores", ra.scores, "Score TSV")->required();
    rank->add_option("--method", ra.method, "Restrict to one method");
    rank->add_option("--output,-o", ra.output, "Ranking TSV (default: stdout)");

    EvaluateArgs ea;
    auto* eval = app.add_subcommand("evaluate", "Correlate scores with gold change measures");
    eval->add_option("--scores", ea.scores, "Score TSV, optionally as label=path; repeatable")->required();
    eval->add_option("--gold", ea.gold, "Gold TSV (word, delta_later, compare, agreement)")->required();
    eval->add_option("--alpha", ea.alpha, "Significance level")->capture_default_str();
    eval->add_option("--agreement-threshold", ea.agreement_threshold, "Minimum annotator agreement")
        ->capture_default_str();
    eval->add_option("--permutations", ea.permutations, "Monte-Carlo permutations when n > 8")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    eval->add_option("--format", ea.format, "text or tsv")->capture_default_str()->check(CLI::IsMember({"text", "tsv"}));
    eval->add_option("--output,-o", ea.output, "Report (default: stdout)");

    SynthArgs ya;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic drift bundle and analytic gold");
    synth->add_option("--spec", ya.spec, "Synthetic spec (JSON)")->required();
    synth->add_option("--output,-o", ya.output, "Bundle directory to write")->required();
    synth->add_option("--gold", ya.gold, "Gold TSV path (default: <output>/gold.tsv)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    if (validate->parsed()) {
        return cmd_validate(va, out, err);
    }
    if (score->parsed()) {
        return cmd_score(sa, g, out, err);
    }
    if (rank->parsed()) {
        return cmd_rank(ra, out, err);
    }
    if (eval->parsed()) {
        return cmd_evaluate(ea, g, out, err);
    }
    return cmd_synth(ya, out, err);
}

}  // namespace semchange::cli
