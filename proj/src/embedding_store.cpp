#include "semchange/embedding_store.hpp"

#include "semchange/error.hpp"
#include "semchange/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace semchange {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kFloatBytes = 4;

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xffU) << 24) | ((v & 0xff00U) << 8) | ((v >> 8) & 0xff00U) | (v >> 24);
    }
    return v;
}

void write_floats(std::ostream& out, std::span<const float> values) {
    std::vector<char> buffer(values.size() * kFloatBytes);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(values[i]));
        std::memcpy(buffer.data() + i * kFloatBytes, &bits, kFloatBytes);
    }
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

std::vector<float> decode_floats(const std::vector<char>& bytes) {
    std::vector<float> values(bytes.size() / kFloatBytes);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, bytes.data() + i * kFloatBytes, kFloatBytes);
        values[i] = std::bit_cast<float>(to_little(bits));
    }
    return values;
}

std::vector<char> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& path) {
    const auto bytes = slurp(path);
    return {bytes.begin(), bytes.end()};
}

std::string where(const std::string& lemma, const std::string& period) {
    return lemma + "/" + period;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::string lemma_, std::string period_, std::size_t rows_,
                                 std::size_t dim_)
    : lemma(std::move(lemma_)), period(std::move(period_)), rows(rows_), dim(dim_),
      data(rows_ * dim_, 0.0f) {}

const WordEntry* BundleManifest::find(const std::string& lemma) const {
    const auto it = std::find_if(words.begin(), words.end(),
                                 [&](const WordEntry& w) { return w.lemma == lemma; });
    return it == words.end() ? nullptr : &*it;
}

std::string percent_encode(const std::string& name) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (std::size_t i = 0; i < name.size(); ++i) {
        const auto c = static_cast<unsigned char>(name[i]);
        const bool safe = std::isalnum(c) || c == '-' || c == '_' || (c == '.' && i > 0);
        if (safe && c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        }
    }
    return out;
}

std::string matrix_path(const std::string& lemma, const std::string& period) {
    return percent_encode(lemma) + "/" + percent_encode(period) + ".f32";
}

BundleManifest make_manifest(std::size_t dim, std::vector<std::string> periods,
                             std::span<const EmbeddingMatrix> matrices) {
    BundleManifest manifest;
    manifest.dim = dim;
    manifest.periods = std::move(periods);
    for (const auto& m : matrices) {
        auto it = std::find_if(manifest.words.begin(), manifest.words.end(),
                               [&](const WordEntry& w) { return w.lemma == m.lemma; });
        if (it == manifest.words.end()) {
            manifest.words.push_back(WordEntry{m.lemma, {}});
            it = std::prev(manifest.words.end());
        }
        it->periods[m.period] = PeriodFile{matrix_path(m.lemma, m.period), m.rows};
    }
    return manifest;
}

BundleManifest parse_manifest(const std::string& json_text) {
    BundleManifest manifest;
    try {
        const json doc = json::parse(json_text);
        manifest.schema_version = doc.at("schema_version").get<int>();
        manifest.dim = doc.at("dim").get<std::size_t>();
        manifest.dtype = doc.at("dtype").get<std::string>();
        manifest.periods = doc.at("periods").get<std::vector<std::string>>();
        for (const auto& w : doc.at("words")) {
            WordEntry entry;
            entry.lemma = w.at("lemma").get<std::string>();
            for (const auto& [period, file] : w.at("periods").items()) {
                entry.periods[period] =
                    PeriodFile{file.at("file").get<std::string>(), file.at("count").get<std::size_t>()};
            }
            manifest.words.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("unreadable manifest: ") + e.what());
    }
    return manifest;
}

std::string serialize_manifest(const BundleManifest& manifest) {
    json doc;
    doc["schema_version"] = manifest.schema_version;
    doc["dim"] = manifest.dim;
    doc["dtype"] = manifest.dtype;
    doc["periods"] = manifest.periods;
    doc["words"] = json::array();
    for (const auto& w : manifest.words) {
        json periods = json::object();
        // manifest period order first, then anything unexpected
        for (const auto& p : manifest.periods) {
            if (const auto it = w.periods.find(p); it != w.periods.end()) {
                periods[p] = {{"file", it->second.file}, {"count", it->second.count}};
            }
        }
        for (const auto& [p, f] : w.periods) {
            if (!periods.contains(p)) {
                periods[p] = {{"file", f.file}, {"count", f.count}};
            }
        }
        doc["words"].push_back({{"lemma", w.lemma}, {"periods", std::move(periods)}});
    }
    return doc.dump(2) + "\n";
}

void write_bundle(const BundleManifest& manifest, std::span<const EmbeddingMatrix> matrices,
                  const fs::path& directory) {
    if (manifest.dim == 0) {
        throw Error("dimension mismatch: manifest dim must be >= 1");
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& m : matrices) {
        if (!seen.emplace(m.lemma, m.period).second) {
            throw Error("duplicate (word, period): " + where(m.lemma, m.period));
        }
        if (m.dim != manifest.dim || m.data.size() != m.rows * m.dim) {
            throw Error("dimension mismatch for " + where(m.lemma, m.period));
        }
        const WordEntry* w = manifest.find(m.lemma);
        if (w == nullptr || !w->periods.contains(m.period)) {
            throw Error("matrix not described by manifest: " + where(m.lemma, m.period));
        }
        if (w->periods.at(m.period).count != m.rows) {
            throw Error("row count mismatch for " + where(m.lemma, m.period));
        }
    }
    for (const auto& w : manifest.words) {
        for (const auto& [period, file] : w.periods) {
            if (!seen.contains({w.lemma, period})) {
                throw Error("manifest entry without matrix: " + where(w.lemma, period));
            }
        }
    }

    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) {
        throw Error("cannot create " + directory.string() + ": " + ec.message());
    }
    for (const auto& m : matrices) {
        const fs::path path = directory / manifest.find(m.lemma)->periods.at(m.period).file;
        fs::create_directories(path.parent_path(), ec);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        write_floats(out, m.data);
        if (!out) {
            throw Error("write failed: " + path.string());
        }
    }
    std::ofstream out(directory / kManifestName, std::ios::binary | std::ios::trunc);
    out << serialize_manifest(manifest);
    if (!out) {
        throw Error("write failed: " + (directory / kManifestName).string());
    }
}

Bundle Bundle::open(const fs::path& directory) {
    Bundle bundle;
    bundle.root_ = directory;
    bundle.manifest_ = parse_manifest(read_text(directory / kManifestName));
    return bundle;
}

bool Bundle::has_period(const std::string& period) const {
    return std::find(manifest_.periods.begin(), manifest_.periods.end(), period) !=
           manifest_.periods.end();
}

EmbeddingMatrix Bundle::read(const std::string& lemma, const std::string& period) const {
    const WordEntry* w = manifest_.find(lemma);
    if (w == nullptr) {
        throw Error("word not found: " + lemma);
    }
    if (!has_period(period)) {
        throw Error("period not found: " + period);
    }
    const auto it = w->periods.find(period);
    if (it == w->periods.end()) {
        // Absent from this period: representable as zero usages.
        return EmbeddingMatrix(lemma, period, 0, manifest_.dim);
    }
    const PeriodFile& file = it->second;
    const auto bytes = slurp(root_ / file.file);
    if (bytes.size() != file.count * manifest_.dim * kFloatBytes) {
        throw Error("corrupt matrix: " + where(lemma, period) + " has " +
                    std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(file.count * manifest_.dim * kFloatBytes));
    }
    EmbeddingMatrix m;
    m.lemma = lemma;
    m.period = period;
    m.rows = file.count;
    m.dim = manifest_.dim;
    m.data = decode_floats(bytes);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        if (!std::isfinite(m.data[i])) {
            throw Error("non-finite value in " + where(lemma, period) + " row " +
                        std::to_string(i / m.dim));
        }
    }
    return m;
}

EmbeddingMatrix read_matrix(const fs::path& bundle, const std::string& lemma,
                            const std::string& period) {
    return Bundle::open(bundle).read(lemma, period);
}

std::vector<Violation> validate_bundle(const fs::path& directory) {
    const BundleManifest manifest = parse_manifest(read_text(directory / kManifestName));
    std::vector<Violation> out;
    auto flag = [&](std::string w, std::string msg) { out.push_back({std::move(w), std::move(msg)}); };

    if (manifest.schema_version != BundleManifest::kSchemaVersion) {
        flag("schema_version", "unsupported schema version " + std::to_string(manifest.schema_version));
    }
    if (manifest.dim < 1) {
        flag("dim", "dim must be >= 1");
    }
    if (manifest.dtype != BundleManifest::kDtype) {
        flag("dtype", "dtype must be f32le, got " + manifest.dtype);
    }
    if (manifest.periods.empty()) {
        flag("periods", "no periods declared");
    }
    std::set<std::string> periods;
    for (const auto& p : manifest.periods) {
        if (!periods.insert(p).second) {
            flag("periods", "duplicate period " + p);
        }
    }
    std::set<std::string> lemmas;
    for (const auto& w : manifest.words) {
        if (!lemmas.insert(w.lemma).second) {
            flag(w.lemma, "duplicate lemma");
        }
        for (const auto& [period, file] : w.periods) {
            const std::string loc = where(w.lemma, period);
            if (!periods.contains(period)) {
                flag(loc, "undeclared period");
            }
            const fs::path path = directory / file.file;
            std::error_code ec;
            if (!fs::is_regular_file(path, ec)) {
                flag(loc, "missing file " + file.file);
                continue;
            }
            const auto size = fs::file_size(path, ec);
            const auto expected = file.count * manifest.dim * kFloatBytes;
            if (ec || size != expected) {
                flag(loc, "file " + file.file + " has " + std::to_string(size) + " bytes, expected " +
                              std::to_string(expected) + " (count " + std::to_string(file.count) +
                              " x dim " + std::to_string(manifest.dim) + " x 4)");
                continue;
            }
            if (manifest.dim == 0) {
                continue;
            }
            const auto values = decode_floats(slurp(path));
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (!std::isfinite(values[i])) {
                    flag(loc, "non-finite value at row " + std::to_string(i / manifest.dim));
                    break;
                }
            }
        }
    }
    return out;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t cap, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (n <= cap) {
        return idx;
    }
    Rng rng(seed);
    for (std::size_t i = 0; i < cap; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

EmbeddingMatrix sample_usages(const EmbeddingMatrix& matrix, std::size_t cap, std::uint64_t seed) {
    if (cap == 0) {
        throw Error("sampling cap must be >= 1");
    }
    if (matrix.rows <= cap) {
        return matrix;
    }
    const auto idx = sample_indices(matrix.rows, cap, seed);
    EmbeddingMatrix out(matrix.lemma, matrix.period, idx.size(), matrix.dim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy_n(matrix.row(idx[r]).begin(), matrix.dim, out.row(r).begin());
    }
    return out;
}

}  // namespace semchange
