#include "semchange/synth.hpp"

#include "semchange/error.hpp"
#include "semchange/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace semchange {

using json = nlohmann::json;

void validate_spec(const DriftSpec& spec) {
    const std::string who = "spec for '" + spec.lemma + "': ";
    if (spec.lemma.empty()) {
        throw Error("spec with empty lemma");
    }
    if (spec.senses.empty()) {
        throw Error(who + "no senses");
    }
    const std::size_t dim = spec.senses.front().mean.size();
    if (dim == 0) {
        throw Error(who + "sense mean has dimension 0");
    }
    for (const auto& s : spec.senses) {
        if (s.mean.size() != dim) {
            throw Error(who + "sense means differ in dimension");
        }
        if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) {
            throw Error(who + "sigma must be > 0");
        }
        if (!std::all_of(s.mean.begin(), s.mean.end(), [](double x) { return std::isfinite(x); })) {
            throw Error(who + "non-finite sense mean");
        }
    }
    for (const auto* w : {&spec.weights_earlier, &spec.weights_later}) {
        if (w->size() != spec.senses.size()) {
            throw Error(who + "weight vector length differs from number of senses");
        }
        if (std::any_of(w->begin(), w->end(), [](double x) { return !(x >= 0.0); })) {
            throw Error(who + "negative weight");
        }
        const double total = std::accumulate(w->begin(), w->end(), 0.0);
        if (std::abs(total - 1.0) > 1e-9) {
            throw Error(who + "weights do not sum to 1");
        }
    }
    if (spec.n_per_period == 0) {
        throw Error(who + "n must be >= 1");
    }
}

std::vector<SenseSpec> separated_senses(std::size_t count, std::size_t dim, double sigma, double separation) {
    if (dim < count) {
        throw Error("dim " + std::to_string(dim) + " too small for " + std::to_string(count) +
                    " separated senses");
    }
    std::vector<SenseSpec> senses;
    const double offset = separation * sigma / std::sqrt(2.0);
    for (std::size_t k = 0; k < count; ++k) {
        SenseSpec s{Vector(dim, 0.0), sigma};
        s.mean[k] = offset;
        senses.push_back(std::move(s));
    }
    return senses;
}

namespace {

std::vector<int> quota_senses(const std::vector<double>& weights, std::size_t n, Rng& rng) {
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double exact = weights[k] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i) {
        ++counts[remainders[i % remainders.size()].second];
        ++assigned;
    }
    std::vector<int> senses;
    senses.reserve(n);
    for (std::size_t k = 0; k < counts.size(); ++k) {
        senses.insert(senses.end(), counts[k], static_cast<int>(k));
    }
    for (std::size_t i = senses.size(); i > 1; --i) {
        std::swap(senses[i - 1], senses[static_cast<std::size_t>(uniform_below(rng, i))]);
    }
    return senses;
}

std::vector<int> multinomial_senses(const std::vector<double>& weights, std::size_t n, Rng& rng) {
    std::vector<int> senses(n);
    for (auto& s : senses) {
        const double u = uniform01(rng);
        double acc = 0.0;
        s = static_cast<int>(weights.size() - 1);
        for (std::size_t k = 0; k < weights.size(); ++k) {
            acc += weights[k];
            if (u < acc) {
                s = static_cast<int>(k);
                break;
            }
        }
    }
    return senses;
}

EmbeddingMatrix draw_period(const DriftSpec& spec, const std::string& period, const std::vector<double>& weights,
                            std::uint64_t stream, std::vector<int>& senses) {
    Rng rng(mix_seed(mix_seed(spec.seed, fnv1a(spec.lemma)), stream));
    senses = spec.allocation == SenseAllocation::quota ? quota_senses(weights, spec.n_per_period, rng)
                                                       : multinomial_senses(weights, spec.n_per_period, rng);
    const std::size_t dim = spec.senses.front().mean.size();
    EmbeddingMatrix m(spec.lemma, period, spec.n_per_period, dim);
    for (std::size_t i = 0; i < senses.size(); ++i) {
        const SenseSpec& sense = spec.senses[static_cast<std::size_t>(senses[i])];
        auto row = m.row(i);
        for (std::size_t j = 0; j < dim; ++j) {
            row[j] = static_cast<float>(sense.mean[j] + sense.sigma * standard_normal(rng));
        }
    }
    return m;
}

}  // namespace

GeneratedWord generate_word(const DriftSpec& spec, const std::string& earlier_period,
                            const std::string& later_period) {
    validate_spec(spec);
    GeneratedWord out;
    out.earlier = draw_period(spec, earlier_period, spec.weights_earlier, 0, out.senses_earlier);
    out.later = draw_period(spec, later_period, spec.weights_later, 1, out.senses_later);
    return out;
}

std::pair<EmbeddingMatrix, EmbeddingMatrix> generate(const DriftSpec& spec, const std::string& earlier_period,
                                                     const std::string& later_period) {
    GeneratedWord w = generate_word(spec, earlier_period, later_period);
    return {std::move(w.earlier), std::move(w.later)};
}

double analytic_jsd(const DriftSpec& spec) {
    validate_spec(spec);
    return jsd(UsageDistribution{spec.weights_earlier}, UsageDistribution{spec.weights_later});
}

double analytic_ms(const DriftSpec& spec) {
    validate_spec(spec);
    return max_square(UsageDistribution{spec.weights_earlier}, UsageDistribution{spec.weights_later});
}

SynthSpec parse_synth_spec(const std::string& json_text) {
    SynthSpec out;
    try {
        const json doc = json::parse(json_text);
        out.dim = doc.at("dim").get<std::size_t>();
        if (doc.contains("periods")) {
            const auto periods = doc.at("periods").get<std::vector<std::string>>();
            if (periods.size() != 2 || periods[0] == periods[1]) {
                throw Error("invalid spec: periods must name two distinct periods");
            }
            out.earlier = periods[0];
            out.later = periods[1];
        }
        const std::uint64_t seed = doc.value("seed", std::uint64_t{0});
        SenseAllocation allocation = SenseAllocation::quota;
        const std::string alloc = doc.value("allocation", std::string("quota"));
        if (alloc == "multinomial") {
            allocation = SenseAllocation::multinomial;
        } else if (alloc != "quota") {
            throw Error("invalid spec: unknown allocation " + alloc);
        }
        std::set<std::string> lemmas;
        for (const auto& w : doc.at("words")) {
            DriftSpec d;
            d.lemma = w.at("lemma").get<std::string>();
            if (!lemmas.insert(d.lemma).second) {
                throw Error("invalid spec: duplicate lemma " + d.lemma);
            }
            d.n_per_period = w.at("n").get<std::size_t>();
            d.weights_earlier = w.at("weights_earlier").get<std::vector<double>>();
            d.weights_later = w.at("weights_later").get<std::vector<double>>();
            d.seed = w.value("seed", seed);
            d.allocation = allocation;
            if (w.contains("senses")) {
                for (const auto& s : w.at("senses")) {
                    d.senses.push_back(SenseSpec{s.at("mean").get<Vector>(), s.value("sigma", w.value("sigma", 1.0))});
                }
            } else {
                d.senses = separated_senses(d.weights_earlier.size(), out.dim, w.value("sigma", 1.0),
                                            w.at("separation").get<double>());
            }
            for (const auto& s : d.senses) {
                if (s.mean.size() != out.dim) {
                    throw Error("invalid spec: sense mean of '" + d.lemma + "' does not match dim");
                }
            }
            validate_spec(d);
            out.words.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("invalid spec: ") + e.what());
    } catch (const Error& e) {
        const std::string msg = e.what();
        throw Error(msg.rfind("invalid spec", 0) == 0 ? msg : "invalid spec: " + msg);
    }
    if (out.dim == 0) {
        throw Error("invalid spec: dim must be >= 1");
    }
    return out;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_synth_spec(buffer.str());
}

std::string synth_gold_tsv(const SynthSpec& spec) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(9);
    os << "word\tdelta_later\tcompare\tagreement\tanalytic_jsd\tanalytic_ms\n";
    for (const auto& w : spec.words) {
        const double j = analytic_jsd(w);
        const double m = analytic_ms(w);
        os << w.lemma << '\t' << m << '\t' << 4.0 - 3.0 * j << '\t' << 1.0 << '\t' << j << '\t' << m << '\n';
    }
    return os.str();
}

void write_synth(const SynthSpec& spec, const std::filesystem::path& bundle_dir,
                 const std::filesystem::path& gold_path) {
    std::vector<EmbeddingMatrix> matrices;
    for (const auto& w : spec.words) {
        auto [earlier, later] = generate(w, spec.earlier, spec.later);
        matrices.push_back(std::move(earlier));
        matrices.push_back(std::move(later));
    }
    const BundleManifest manifest = make_manifest(spec.dim, {spec.earlier, spec.later}, matrices);
    write_bundle(manifest, matrices, bundle_dir);
    if (gold_path.has_parent_path()) {
        std::filesystem::create_directories(gold_path.parent_path());
    }
    std::ofstream out(gold_path, std::ios::binary | std::ios::trunc);
    out << synth_gold_tsv(spec);
    if (!out) {
        throw Error("write failed: " + gold_path.string());
    }
}

}  // namespace semchange
