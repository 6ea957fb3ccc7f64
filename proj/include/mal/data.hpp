#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "mal/errors.hpp"
#include "mal/matrix.hpp"
#include "mal/rng.hpp"

namespace mal {

/// A flat classification dataset. Features live in [0, 1]; images are
/// flattened row-major, so d_in is 784 for MNIST-family data and 3072 for
/// CIFAR. Immutable after construction and safe to share across threads.
struct Dataset {
    std::string name;
    MatF features; // n × d_in
    std::vector<int> labels;
    int num_classes = 0;

    int size() const { return features.rows; }
    int input_dim() const { return features.cols; }

    void validate() const {
        if (features.rows < 1) throw ConfigError("dataset '" + name + "' is empty");
        if (labels.size() != static_cast<std::size_t>(features.rows))
            throw ConfigError("dataset '" + name + "': " + std::to_string(labels.size()) +
                              " labels for " + std::to_string(features.rows) + " samples");
        if (num_classes < 1) throw ConfigError("dataset '" + name + "': num_classes must be >= 1");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || labels[i] >= num_classes)
                throw ConfigError("dataset '" + name + "': label " + std::to_string(labels[i]) +
                                  " at sample " + std::to_string(i) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
        }
        for (float v : features.data) {
            if (!(v >= 0.0f && v <= 1.0f))
                throw ConfigError("dataset '" + name + "': feature outside [0, 1]");
        }
    }
};

using ByteSpan = std::span<const std::uint8_t>;

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, ByteSpan bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

inline bool is_gzip(ByteSpan bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

/// Inflates a gzip stream with zlib. Non-gzip input is returned unchanged.
inline std::vector<std::uint8_t> decompress_if_gzip(std::vector<std::uint8_t> bytes) {
    if (!is_gzip(bytes)) return bytes;
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw FormatError("zlib: inflateInit failed");
    std::vector<std::uint8_t> out;
    out.reserve(bytes.size() * 4);
    std::vector<std::uint8_t> buf(1 << 16);
    zs.next_in = bytes.data();
    zs.avail_in = static_cast<uInt>(bytes.size());
    int rc = Z_OK;
    do {
        zs.next_out = buf.data();
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw FormatError("gzip stream is corrupt (zlib rc=" + std::to_string(rc) + ")");
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
    } while (rc != Z_STREAM_END);
    inflateEnd(&zs);
    return out;
}

inline std::uint32_t read_u32be(ByteSpan bytes, std::size_t pos) {
    if (pos + 4 > bytes.size())
        throw FormatError("truncated header: need 4 bytes at offset " + std::to_string(pos) +
                          ", stream has " + std::to_string(bytes.size()));
    return (static_cast<std::uint32_t>(bytes[pos]) << 24) |
           (static_cast<std::uint32_t>(bytes[pos + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[pos + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[pos + 3]);
}

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

/// Parses an IDX image file (big-endian magic 2051, dims N × rows × cols,
/// then unsigned pixel bytes). Pixels land in [0, 1] as value/255; images are
/// flattened row-major. Stream length must be exact.
inline MatF parse_idx_images(ByteSpan bytes) {
    const std::uint32_t magic = read_u32be(bytes, 0);
    if (magic != kIdxImageMagic)
        throw FormatError("IDX image magic mismatch: expected 2051, got " + std::to_string(magic));
    const std::uint64_t n = read_u32be(bytes, 4);
    const std::uint64_t rows = read_u32be(bytes, 8);
    const std::uint64_t cols = read_u32be(bytes, 12);
    const std::uint64_t need = 16 + n * rows * cols;
    if (bytes.size() < need)
        throw FormatError("IDX image payload truncated: need " + std::to_string(need) +
                          " bytes, have " + std::to_string(bytes.size()));
    if (bytes.size() > need)
        throw FormatError("IDX image stream has " + std::to_string(bytes.size() - need) +
                          " trailing bytes after the declared payload");
    MatF out(static_cast<int>(n), static_cast<int>(rows * cols));
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(bytes[16 + i] / 255.0);
    return out;
}

/// Parses an IDX label file (magic 2049, one dim, unsigned label bytes).
/// Label semantics (class count) are assigned downstream.
inline std::vector<int> parse_idx_labels(ByteSpan bytes) {
    const std::uint32_t magic = read_u32be(bytes, 0);
    if (magic != kIdxLabelMagic)
        throw FormatError("IDX label magic mismatch: expected 2049, got " + std::to_string(magic));
    const std::uint64_t n = read_u32be(bytes, 4);
    const std::uint64_t need = 8 + n;
    if (bytes.size() < need)
        throw FormatError("IDX label payload truncated: need " + std::to_string(need) +
                          " bytes, have " + std::to_string(bytes.size()));
    if (bytes.size() > need)
        throw FormatError("IDX label stream has " + std::to_string(bytes.size() - need) +
                          " trailing bytes after the declared payload");
    std::vector<int> labels(n);
    for (std::uint64_t i = 0; i < n; ++i) labels[i] = bytes[8 + i];
    return labels;
}

inline Dataset dataset_from_idx(std::string name, ByteSpan image_bytes, ByteSpan label_bytes,
                                int num_classes) {
    Dataset d;
    d.name = std::move(name);
    d.features = parse_idx_images(image_bytes);
    d.labels = parse_idx_labels(label_bytes);
    d.num_classes = num_classes;
    d.validate();
    return d;
}

/// CIFAR-10 binary batches: 3073-byte records (label byte + 3072 pixel bytes
/// in the file's channel-major order).
inline Dataset parse_cifar10(ByteSpan bytes, std::string name = "cifar10") {
    constexpr std::size_t kRecord = 3073;
    if (bytes.size() % kRecord != 0)
        throw FormatError("CIFAR-10 stream length " + std::to_string(bytes.size()) +
                          " is not a multiple of 3073 (remainder " +
                          std::to_string(bytes.size() % kRecord) + " bytes)");
    const std::size_t n = bytes.size() / kRecord;
    Dataset d;
    d.name = std::move(name);
    d.num_classes = 10;
    d.features = MatF(static_cast<int>(n), 3072);
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = bytes.data() + i * kRecord;
        if (rec[0] >= 10)
            throw FormatError("CIFAR-10 record " + std::to_string(i) + " has label " +
                              std::to_string(rec[0]) + " >= 10");
        d.labels[i] = rec[0];
        float* row = d.features.row_ptr(static_cast<int>(i));
        for (int k = 0; k < 3072; ++k) row[k] = static_cast<float>(rec[1 + k] / 255.0);
    }
    d.validate();
    return d;
}

enum class Cifar100Labels { Coarse, Fine };

/// CIFAR-100 binary: 3074-byte records (coarse label, fine label, pixels).
inline Dataset parse_cifar100(ByteSpan bytes, Cifar100Labels kind,
                              std::string name = "cifar100") {
    constexpr std::size_t kRecord = 3074;
    if (bytes.size() % kRecord != 0)
        throw FormatError("CIFAR-100 stream length " + std::to_string(bytes.size()) +
                          " is not a multiple of 3074 (remainder " +
                          std::to_string(bytes.size() % kRecord) + " bytes)");
    const std::size_t n = bytes.size() / kRecord;
    const int classes = kind == Cifar100Labels::Coarse ? 20 : 100;
    Dataset d;
    d.name = std::move(name);
    d.num_classes = classes;
    d.features = MatF(static_cast<int>(n), 3072);
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = bytes.data() + i * kRecord;
        const std::uint8_t label = kind == Cifar100Labels::Coarse ? rec[0] : rec[1];
        if (label >= classes)
            throw FormatError("CIFAR-100 record " + std::to_string(i) + " has label " +
                              std::to_string(label) + " >= " + std::to_string(classes));
        d.labels[i] = label;
        float* row = d.features.row_ptr(static_cast<int>(i));
        for (int k = 0; k < 3072; ++k) row[k] = static_cast<float>(rec[2 + k] / 255.0);
    }
    d.validate();
    return d;
}

inline Dataset concat(const std::vector<Dataset>& parts) {
    if (parts.empty()) throw ConfigError("concat: no dataset parts");
    Dataset out = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const Dataset& p = parts[i];
        if (p.input_dim() != out.input_dim() || p.num_classes != out.num_classes)
            throw ConfigError("concat: dataset parts disagree on shape");
        out.features.data.insert(out.features.data.end(), p.features.data.begin(),
                                 p.features.data.end());
        out.features.rows += p.features.rows;
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    return out;
}

/// Deterministic seeded subsample without replacement, stratified per class:
/// each class gets n/K samples, the n%K remainder goes to the lowest class
/// indices. Classes too small for their quota are an error.
inline Dataset subsample(const Dataset& data, int n, std::uint64_t seed) {
    const int k = data.num_classes;
    if (n < k)
        throw ConfigError("subsample: n=" + std::to_string(n) + " below class count " +
                          std::to_string(k) + ", stratification impossible");
    if (n > data.size())
        throw ConfigError("subsample: n=" + std::to_string(n) + " exceeds dataset size " +
                          std::to_string(data.size()));
    std::vector<std::vector<int>> by_class(k);
    for (int i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

    CounterRng rng(derive_seed(seed, "subsample"));
    std::vector<int> picked;
    picked.reserve(n);
    for (int c = 0; c < k; ++c) {
        const int quota = n / k + (c < n % k ? 1 : 0);
        auto& pool = by_class[c];
        if (quota > static_cast<int>(pool.size()))
            throw ConfigError("subsample: class " + std::to_string(c) + " has " +
                              std::to_string(pool.size()) + " samples, quota is " +
                              std::to_string(quota));
        for (int i = 0; i < quota; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
            std::swap(pool[i], pool[j]);
            picked.push_back(pool[i]);
        }
    }

    Dataset out;
    out.name = data.name;
    out.num_classes = k;
    out.features = MatF(n, data.input_dim());
    out.labels.resize(n);
    for (int r = 0; r < n; ++r) {
        const int src = picked[r];
        std::copy_n(data.features.row_ptr(src), data.input_dim(), out.features.row_ptr(r));
        out.labels[r] = data.labels[src];
    }
    return out;
}

/// A named dataset resolved to concrete files. `images`/`labels` may override
/// the standard file names; anything gzip-compressed is inflated on the fly.
struct DatasetLocation {
    std::string images;
    std::string labels;
    int num_classes = 10;
};

inline std::vector<std::uint8_t> read_maybe_gz(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    if (fs::exists(path)) return decompress_if_gzip(read_file(path));
    fs::path gz = path;
    gz += ".gz";
    if (fs::exists(gz)) return decompress_if_gzip(read_file(gz));
    throw IoError("dataset file not found: " + path.string() + " (also tried " + gz.string() +
                  ")");
}

/// Loads one of the standard datasets from `root` by name and split
/// ("train" or "test"). Known names: mnist, fashion-mnist, cifar10, cifar100,
/// cifar100-coarse. File names follow the official distributions; every file
/// may also be present as a .gz sibling.
inline Dataset load_standard_dataset(const std::filesystem::path& root, const std::string& name,
                                     const std::string& split) {
    if (split != "train" && split != "test")
        throw ConfigError("unknown split '" + split + "' (expected train or test)");
    const bool train = split == "train";
    if (name == "mnist" || name == "fashion-mnist" || name == "fashion_mnist") {
        const std::filesystem::path dir =
            root / (name == "mnist" ? "mnist" : "fashion-mnist");
        const std::string stem = train ? "train" : "t10k";
        auto images = read_maybe_gz(dir / (stem + "-images-idx3-ubyte"));
        auto labels = read_maybe_gz(dir / (stem + "-labels-idx1-ubyte"));
        return dataset_from_idx(name == "fashion_mnist" ? "fashion-mnist" : name, images, labels, 10);
    }
    if (name == "cifar10") {
        const std::filesystem::path dir = root / "cifar10";
        if (train) {
            std::vector<Dataset> parts;
            for (int b = 1; b <= 5; ++b)
                parts.push_back(
                    parse_cifar10(read_maybe_gz(dir / ("data_batch_" + std::to_string(b) + ".bin")),
                                  "cifar10"));
            return concat(parts);
        }
        return parse_cifar10(read_maybe_gz(dir / "test_batch.bin"), "cifar10");
    }
    if (name == "cifar100" || name == "cifar100-coarse") {
        const std::filesystem::path dir = root / "cifar100";
        const auto kind =
            name == "cifar100-coarse" ? Cifar100Labels::Coarse : Cifar100Labels::Fine;
        return parse_cifar100(read_maybe_gz(dir / (train ? "train.bin" : "test.bin")), kind,
                              name);
    }
    throw ConfigError("unknown dataset '" + name +
                      "' (known: mnist, fashion-mnist, cifar10, cifar100, cifar100-coarse; or "
                      "pass explicit --images/--labels files)");
}

/// Loads a custom IDX pair; `name` becomes the dataset id.
inline Dataset load_idx_dataset(const std::string& name, const std::filesystem::path& images,
                                const std::filesystem::path& labels, int num_classes) {
    return dataset_from_idx(name, read_maybe_gz(images), read_maybe_gz(labels), num_classes);
}

} // namespace mal
