#include "semchange/cli.hpp"
#include "semchange/embedding_store.hpp"
#include "semchange/error.hpp"
#include "semchange/measures.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace semchange;
using semchange::testing::TempDir;
using semchange::testing::random_matrix;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_lines(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Three words in both periods plus one only in the earlier period.
void small_bundle(const std::filesystem::path& dir) {
    Rng rng(21);
    std::vector<EmbeddingMatrix> ms;
    for (const char* w : {"alpha", "beta", "gamma"}) {
        ms.push_back(random_matrix(w, "t", 30, 4, rng));
        ms.push_back(random_matrix(w, "t1", 25, 4, rng));
    }
    ms.push_back(random_matrix("lonely", "t", 10, 4, rng));
    write_bundle(make_manifest(4, {"t", "t1"}, ms), ms, dir);
}

// Words whose later weights drift progressively further from the earlier ones.
std::string drift_spec(std::size_t words) {
    std::ostringstream os;
    os << R"({"dim": 6, "seed": 5, "words": [)";
    for (std::size_t i = 0; i < words; ++i) {
        const double x = 0.7 * static_cast<double>(i) / static_cast<double>(words - 1);
        os << (i ? "," : "") << R"({"lemma": "w)" << i << R"(", "n": 200, "sigma": 1, "separation": 10,)"
           << R"("weights_earlier": [0.8, 0.1, 0.1], "weights_later": [)" << 0.8 - x << ", 0.1, " << 0.1 + x
           << "]}";
    }
    os << "]}";
    return os.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("validate exit codes") {
    TempDir dir;
    small_bundle(dir.path());
    CHECK(run({"validate", dir.path().string()}).code == cli::kOk);

    std::filesystem::resize_file(dir / "alpha/t.f32", 7);
    const auto bad = run({"validate", dir.path().string()});
    CHECK(bad.code == cli::kDataViolation);
    CHECK(bad.out.find("alpha/t\t") == 0);

    const auto missing = run({"validate", (dir / "nope").string()});
    CHECK(missing.code == cli::kUsageError);
    CHECK(missing.err.find("usage:") != std::string::npos);

    CHECK(run({}).code == cli::kUsageError);
    CHECK(run({"frobnicate"}).code == cli::kUsageError);
    CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("score writes one row per word and method, skipping absent words") {
    TempDir dir;
    small_bundle(dir / "b");
    const auto r = run({"score", "--bundle", (dir / "b").string(), "--skip-log", (dir / "skip.txt").string()});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.rfind("lemma\tmethod\tearlier\tlater\tvalue\n", 0) == 0);
    CHECK(count_lines(r.out) == 1 + 3 * 4);
    CHECK(r.out.find("lonely") == std::string::npos);
    const std::string skip = slurp(dir / "skip.txt");
    CHECK(skip.find("lonely") != std::string::npos);
    CHECK(skip.find("absent") != std::string::npos);

    std::istringstream in(r.out);
    const auto scores = parse_scores(in);
    CHECK(scores.size() == 12);
    CHECK(scores[0].earlier == "t");
    CHECK(scores[0].later == "t1");
}

TEST_CASE("score is reproducible and independent of --jobs") {
    TempDir dir;
    small_bundle(dir / "b");
    const std::string b = (dir / "b").string();
    const auto one = run({"--seed", "3", "score", "--bundle", b});
    const auto again = run({"--seed", "3", "score", "--bundle", b});
    const auto parallel = run({"--seed", "3", "--jobs", "4", "score", "--bundle", b});
    REQUIRE(one.code == cli::kOk);
    CHECK(one.out == again.out);
    CHECK(one.out == parallel.out);
}

TEST_CASE("score argument errors") {
    TempDir dir;
    small_bundle(dir / "b");
    const std::string b = (dir / "b").string();
    CHECK(run({"score", "--bundle", b, "--methods", "prt,bogus"}).code == cli::kUsageError);
    CHECK(run({"score", "--bundle", b, "--earlier", "zz"}).code != cli::kOk);
    CHECK(run({"score", "--bundle", (dir / "none").string()}).code == cli::kUsageError);
    CHECK(run({"score"}).code == cli::kUsageError);
}

TEST_CASE("score with --trace reports used rows") {
    TempDir dir;
    small_bundle(dir / "b");
    const auto r = run({"score", "--bundle", (dir / "b").string(), "--cap", "20", "--methods", "kmeans-jsd",
                        "--trace", (dir / "trace.tsv").string()});
    REQUIRE(r.code == cli::kOk);
    const std::string trace = slurp(dir / "trace.tsv");
    CHECK(trace.find("alpha\tt\t30\t20\tt1\t25\t20\t") != std::string::npos);
}

TEST_CASE("rank orders by value") {
    TempDir dir;
    std::ofstream(dir / "s.tsv") << "lemma\tmethod\tearlier\tlater\tvalue\n"
                                 << "a\tprt\tt\tt1\t0.1\nb\tprt\tt\tt1\t0.3\nc\tprt\tt\tt1\t0.2\n";
    const auto r = run({"rank", "--scores", (dir / "s.tsv").string()});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out == "rank\tlemma\tmethod\tearlier\tlater\tvalue\n"
                   "1\tb\tprt\tt\tt1\t0.300000000\n"
                   "2\tc\tprt\tt\tt1\t0.200000000\n"
                   "3\ta\tprt\tt\tt1\t0.100000000\n");
}

TEST_CASE("synth then evaluate recovers the planted ranking") {
    TempDir dir;
    std::ofstream(dir / "spec.json") << drift_spec(12);
    const auto s = run({"synth", "--spec", (dir / "spec.json").string(), "--output", (dir / "b").string()});
    REQUIRE(s.code == cli::kOk);
    CHECK(run({"validate", (dir / "b").string()}).code == cli::kOk);

    REQUIRE(run({"score", "--bundle", (dir / "b").string(), "--methods", "kmeans-jsd,prt", "-o",
                 (dir / "scores.tsv").string()})
                .code == cli::kOk);
    const auto ev = run({"evaluate", "--scores", "synthetic=" + (dir / "scores.tsv").string(), "--gold",
                         (dir / "b/gold.tsv").string(), "--format", "tsv"});
    REQUIRE(ev.code == cli::kOk);
    std::istringstream lines(ev.out);
    std::string line;
    bool found = false;
    while (std::getline(lines, line)) {
        if (line.rfind("kmeans-jsd\tcompare\tsynthetic\t", 0) == 0) {
            found = true;
            const double rho = std::stod(line.substr(std::string("kmeans-jsd\tcompare\tsynthetic\t").size()));
            CHECK(rho >= 0.95);
        }
    }
    CHECK(found);

    SUBCASE("shuffled gold gives no significant correlation") {
        std::ifstream in(dir / "b/gold.tsv");
        std::string header;
        std::getline(in, header);
        std::vector<std::string> words;
        std::vector<std::string> rest;
        while (std::getline(in, line)) {
            const auto tab = line.find('\t');
            words.push_back(line.substr(0, tab));
            rest.push_back(line.substr(tab));
        }
        // a derangement with rank correlation exactly 0 against the identity
        const std::size_t perm[] = {6, 0, 4, 9, 11, 3, 5, 10, 2, 8, 7, 1};
        REQUIRE(words.size() == 12);
        std::ofstream shuffled(dir / "shuffled.tsv");
        shuffled << header << "\n";
        for (std::size_t i = 0; i < words.size(); ++i) {
            shuffled << words[i] << rest[perm[i]] << "\n";
        }
        shuffled.close();
        const auto null = run({"evaluate", "--scores", (dir / "scores.tsv").string(), "--gold",
                               (dir / "shuffled.tsv").string(), "--format", "tsv"});
        REQUIRE(null.code == cli::kOk);
        std::istringstream nl(null.out);
        std::getline(nl, line);
        while (std::getline(nl, line)) {
            CAPTURE(line);
            std::istringstream fields(line);
            std::string field;
            for (int f = 0; f <= 5; ++f) std::getline(fields, field, '\t');
            CHECK(field == "0");  // significant
        }
    }
}

TEST_CASE("evaluate and synth errors") {
    TempDir dir;
    std::ofstream(dir / "s.tsv") << "lemma\tmethod\tearlier\tlater\tvalue\na\tprt\tt\tt1\t0.1\n";
    std::ofstream(dir / "g.tsv") << "word\tdelta_later\tagreement\na\t0.1\t1\n";
    const auto e = run({"evaluate", "--scores", (dir / "s.tsv").string(), "--gold", (dir / "g.tsv").string()});
    CHECK(e.code == cli::kDataViolation);
    CHECK(e.err.find("compare") != std::string::npos);

    std::ofstream(dir / "bad.json") << R"({"dim": 2, "words": [{"lemma": "a", "n": 5, "separation": 10,
        "weights_earlier": [0.5, 0.6], "weights_later": [1, 0]}]})";
    const auto y = run({"synth", "--spec", (dir / "bad.json").string(), "--output", (dir / "out").string()});
    CHECK(y.code != cli::kOk);
    CHECK(y.err.find("weights do not sum to 1") != std::string::npos);

    std::ofstream(dir / "one.json") << R"({"dim": 3, "words": [{"lemma": "a", "n": 30, "separation": 10,
        "weights_earlier": [1, 0], "weights_later": [0, 1]}]})";
    REQUIRE(run({"synth", "--spec", (dir / "one.json").string(), "--output", (dir / "one").string()}).code ==
            cli::kOk);
    CHECK(validate_bundle(dir / "one").empty());
    CHECK(std::filesystem::exists(dir / "one/gold.tsv"));
}

}  // TEST_SUITE
