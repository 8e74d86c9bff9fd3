#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace semchange {

// Token embeddings of one lemma in one period, stored row-major as float32.
struct EmbeddingMatrix {
    std::string lemma;
    std::string period;
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<float> data;

    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::string lemma, std::string period, std::size_t rows, std::size_t dim);

    std::span<const float> row(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }
    std::span<float> row(std::size_t i) {
        return {data.data() + i * dim, dim};
    }
    bool empty() const { return rows == 0; }
};

struct PeriodFile {
    std::string file;  // relative to the bundle root
    std::size_t count = 0;
};

struct WordEntry {
    std::string lemma;
    std::map<std::string, PeriodFile> periods;
};

// Contents of manifest.json. Key names on disk:
//   schema_version, dim, dtype, periods, words[].lemma,
//   words[].periods.<period>.file, words[].periods.<period>.count
struct BundleManifest {
    static constexpr int kSchemaVersion = 1;
    static constexpr const char* kDtype = "f32le";

    int schema_version = kSchemaVersion;
    std::size_t dim = 0;
    std::string dtype = kDtype;
    std::vector<std::string> periods;
    std::vector<WordEntry> words;

    const WordEntry* find(const std::string& lemma) const;
};

inline constexpr const char* kManifestName = "manifest.json";

// Percent-encodes every byte outside [A-Za-z0-9._-]. Leading dots are also
// encoded so no component can be "." or "..".
std::string percent_encode(const std::string& name);

// Conventional location of a matrix file: <lemma>/<period>.f32, encoded.
std::string matrix_path(const std::string& lemma, const std::string& period);

// Builds a manifest describing `matrices` with conventional file paths.
BundleManifest make_manifest(std::size_t dim, std::vector<std::string> periods,
                             std::span<const EmbeddingMatrix> matrices);

BundleManifest parse_manifest(const std::string& json_text);
std::string serialize_manifest(const BundleManifest& manifest);

void write_bundle(const BundleManifest& manifest, std::span<const EmbeddingMatrix> matrices,
                  const std::filesystem::path& directory);

// Read-only view over a bundle directory. Safe to share across threads once
// opened; every read goes to its own stream.
class Bundle {
public:
    static Bundle open(const std::filesystem::path& directory);

    const BundleManifest& manifest() const { return manifest_; }
    const std::filesystem::path& root() const { return root_; }
    bool has_period(const std::string& period) const;

    EmbeddingMatrix read(const std::string& lemma, const std::string& period) const;

private:
    std::filesystem::path root_;
    BundleManifest manifest_;
};

EmbeddingMatrix read_matrix(const std::filesystem::path& bundle, const std::string& lemma,
                            const std::string& period);

struct Violation {
    std::string where;  // lemma/period/field the problem concerns
    std::string message;
};

// Empty iff every manifest invariant holds. Throws Error only when the
// manifest itself cannot be read or parsed.
std::vector<Violation> validate_bundle(const std::filesystem::path& directory);

// At most `cap` rows drawn uniformly without replacement (partial
// Fisher-Yates), kept in their original relative order.
EmbeddingMatrix sample_usages(const EmbeddingMatrix& matrix, std::size_t cap, std::uint64_t seed);

// Indices chosen by sample_usages, ascending.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t cap, std::uint64_t seed);

}  // namespace semchange
