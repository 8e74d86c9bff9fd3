#pragma once

#include "semchange/embedding_store.hpp"
#include "semchange/measures.hpp"
#include "semchange/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace semchange {

// Isotropic Gaussian sense.
struct SenseSpec {
    Vector mean;
    double sigma = 1.0;
};

// How usages are distributed over senses within one period.
enum class SenseAllocation {
    // Exactly round(w_k * n) usages per sense (largest remainder), in random
    // order. Realised proportions equal the planted weights up to 1/n.
    quota,
    // Every usage draws its sense independently from the weights.
    multinomial,
};

struct DriftSpec {
    std::string lemma;
    std::vector<SenseSpec> senses;
    std::vector<double> weights_earlier;
    std::vector<double> weights_later;
    std::size_t n_per_period = 500;
    std::uint64_t seed = 0;
    SenseAllocation allocation = SenseAllocation::quota;
};

// Throws Error describing the first violated constraint.
void validate_spec(const DriftSpec& spec);

// Sense centroids at distance `separation * sigma` from each other: sense k
// sits at (separation * sigma / sqrt 2) * e_k. Requires dim >= count.
std::vector<SenseSpec> separated_senses(std::size_t count, std::size_t dim, double sigma, double separation);

// Sense index of every generated usage, per period.
struct GeneratedWord {
    EmbeddingMatrix earlier;
    EmbeddingMatrix later;
    std::vector<int> senses_earlier;
    std::vector<int> senses_later;
};

GeneratedWord generate_word(const DriftSpec& spec, const std::string& earlier_period = "earlier",
                            const std::string& later_period = "later");

std::pair<EmbeddingMatrix, EmbeddingMatrix> generate(const DriftSpec& spec,
                                                     const std::string& earlier_period = "earlier",
                                                     const std::string& later_period = "later");

double analytic_jsd(const DriftSpec& spec);
double analytic_ms(const DriftSpec& spec);

// A whole fixture: several drifting words over one period pair.
struct SynthSpec {
    std::size_t dim = 0;
    std::string earlier = "earlier";
    std::string later = "later";
    std::vector<DriftSpec> words;
};

// JSON schema:
//   { "dim": 16, "periods": ["earlier", "later"], "seed": 1,
//     "allocation": "quota" | "multinomial",
//     "words": [ { "lemma": "w", "n": 500, "sigma": 1.0, "separation": 10,
//                  "weights_earlier": [...], "weights_later": [...] },
//                { "lemma": "v", "n": 100, "senses": [ {"mean": [...], "sigma": 0.5} ],
//                  "weights_earlier": [1], "weights_later": [1], "seed": 9 } ] }
// "periods", "seed" and "allocation" are optional. A word either lists its
// senses or gives "separation" (with "sigma") to place one sense per weight.
SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec load_synth_spec(const std::filesystem::path& path);

// Gold rows derived from the planted weights: delta_later = analytic MS,
// compare = 4 - 3 * analytic JSD, agreement = 1, plus the raw analytic
// values in analytic_jsd / analytic_ms columns.
std::string synth_gold_tsv(const SynthSpec& spec);

// Writes the bundle to `bundle_dir` and the gold TSV to `gold_path`.
void write_synth(const SynthSpec& spec, const std::filesystem::path& bundle_dir,
                 const std::filesystem::path& gold_path);

}  // namespace semchange
