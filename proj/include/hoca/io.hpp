#pragma once

// On-disk formats: feature bundles (one little-endian f64 binary per
// modality plus a JSON manifest), model checkpoints (a manifest plus one
// flat parameter file with per-entry offsets, same binary convention), and
// CSV emission with shortest round-trip formatting of doubles.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoca/autodiff.hpp"
#include "hoca/errors.hpp"
#include "hoca/tensor.hpp"

namespace hoca {

inline constexpr int kBundleVersion = 1;
inline constexpr int kCheckpointVersion = 1;

// ---- f64 little-endian binary ------------------------------------------------

namespace detail {

inline std::uint64_t to_le_bits(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    return bits;
}

inline double from_le_bits(std::uint64_t bits) {
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

inline void write_f64_le(std::ostream& out, std::span<const double> values) {
    for (double v : values) {
        std::uint64_t bits = to_le_bits(v);
        out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
}

inline std::vector<double> read_f64_le(std::istream& in, std::size_t count) {
    std::vector<double> values(count);
    for (double& v : values) {
        std::uint64_t bits;
        in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
        if (!in) throw IoError("binary read truncated");
        v = from_le_bits(bits);
    }
    return values;
}

} // namespace detail

/// Shortest decimal representation that round-trips the exact double.
inline std::string fmt_f64(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---- feature bundles -----------------------------------------------------------

struct BundleModality {
    std::string name;
    FeatureMatrix features;
};

/// Writes bundle.json plus one <name>.bin per modality into `dir`.
inline void write_feature_bundle(const std::filesystem::path& dir,
                                 const std::vector<BundleModality>& modalities) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["version"] = kBundleVersion;
    manifest["modalities"] = nlohmann::json::array();
    for (const BundleModality& m : modalities) {
        const std::string file = m.name + ".bin";
        std::ofstream bin(dir / file, std::ios::binary);
        if (!bin) throw IoError("cannot open " + (dir / file).string() + " for writing");
        detail::write_f64_le(bin, m.features.values());
        manifest["modalities"].push_back({{"name", m.name},
                                          {"d", m.features.d()},
                                          {"t", m.features.t()},
                                          {"file", file},
                                          {"byte_order", "little-endian"},
                                          {"element", "f64"},
                                          {"layout", "row-major d x t"}});
    }
    std::ofstream mf(dir / "bundle.json");
    if (!mf) throw IoError("cannot open bundle manifest for writing");
    mf << manifest.dump(2) << "\n";
}

inline std::vector<BundleModality> read_feature_bundle(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "bundle.json");
    if (!mf) throw IoError("missing bundle manifest: " + (dir / "bundle.json").string());
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed bundle manifest: " + std::string(e.what()));
    }
    if (manifest.value("version", -1) != kBundleVersion)
        throw IoError("unsupported bundle version");

    std::vector<BundleModality> out;
    for (const auto& entry : manifest.at("modalities")) {
        const std::string name = entry.at("name");
        const std::size_t d = entry.at("d"), t = entry.at("t");
        const std::string file = entry.at("file");
        if (entry.value("byte_order", "") != "little-endian" ||
            entry.value("element", "") != "f64")
            throw IoError("bundle modality " + name + " has an unsupported encoding");
        const auto path = dir / file;
        std::error_code ec;
        const auto size = std::filesystem::file_size(path, ec);
        if (ec) throw IoError("missing bundle file: " + path.string());
        if (size != static_cast<std::uintmax_t>(8) * d * t)
            throw IoError("bundle file " + file + " has the wrong length");
        std::ifstream bin(path, std::ios::binary);
        std::vector<double> values = detail::read_f64_le(bin, d * t);
        out.push_back(BundleModality{name, FeatureMatrix(d, t, std::move(values))});
    }
    return out;
}

// ---- checkpoints ---------------------------------------------------------------

/// Writes checkpoint.json plus params.bin (flat little-endian f64 arrays at
/// the manifest offsets). `meta` is stored verbatim under "meta".
inline void write_checkpoint(const std::filesystem::path& dir, const ad::ParamStore& store,
                             const nlohmann::json& meta) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["version"] = kCheckpointVersion;
    manifest["meta"] = meta;
    manifest["file"] = "params.bin";
    manifest["params"] = nlohmann::json::array();
    std::ofstream bin(dir / "params.bin", std::ios::binary);
    if (!bin) throw IoError("cannot open params.bin for writing");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& e = store.entry(i);
        detail::write_f64_le(bin, e.value.values());
        manifest["params"].push_back({{"name", e.name},
                                      {"shape", e.value.shape()},
                                      {"offset", offset},
                                      {"count", e.value.size()}});
        offset += e.value.size();
    }
    std::ofstream mf(dir / "checkpoint.json");
    if (!mf) throw IoError("cannot open checkpoint manifest for writing");
    mf << manifest.dump(2) << "\n";
}

/// Loads parameters into an existing store; every entry must match by name
/// and shape. Returns the manifest's meta object.
inline nlohmann::json read_checkpoint(const std::filesystem::path& dir,
                                      ad::ParamStore& store) {
    std::ifstream mf(dir / "checkpoint.json");
    if (!mf) throw IoError("missing checkpoint manifest: " + (dir / "checkpoint.json").string());
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed checkpoint manifest: " + std::string(e.what()));
    }
    if (manifest.value("version", -1) != kCheckpointVersion)
        throw IoError("unsupported checkpoint version");
    std::ifstream bin(dir / manifest.value("file", "params.bin"), std::ios::binary);
    if (!bin) throw IoError("missing checkpoint parameter file");

    std::size_t loaded = 0;
    for (const auto& entry : manifest.at("params")) {
        const std::string name = entry.at("name");
        const std::vector<std::size_t> shape = entry.at("shape");
        const std::size_t offset = entry.at("offset"), count = entry.at("count");
        DenseTensor& value = store.value(name);
        if (value.shape() != shape)
            throw IoError("checkpoint parameter " + name + " has mismatched shape");
        bin.seekg(static_cast<std::streamoff>(offset * 8));
        value.values() = detail::read_f64_le(bin, count);
        ++loaded;
    }
    if (loaded != store.size())
        throw IoError("checkpoint does not cover every model parameter");
    return manifest.at("meta");
}

// ---- CSV -----------------------------------------------------------------------

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

} // namespace hoca
