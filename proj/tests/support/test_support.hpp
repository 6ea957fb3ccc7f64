#pragma once

// Shared helpers for the test suites: a deterministic synthetic image dataset
// (written through real IDX bytes so tests exercise the production parsers),
// an independent forward-pass oracle, and small filesystem utilities.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>
#include <zlib.h>

#include "mal/data.hpp"
#include "mal/nn.hpp"
#include "mal/rng.hpp"

namespace testsup {

// ---------------------------------------------------------------------------
// synthetic 10-class image data (28x28, class prototypes + pixel noise)

struct SynthSpec {
    int classes = 10;
    int side = 28;
    double noise = 0.3;
    std::uint64_t world_seed = 7;
};

/// Per-class prototype images: a seeded coarse 7x7 field upsampled bilinearly,
/// values kept inside [0.05, 0.95] so noise has room in both directions.
inline std::vector<std::vector<double>> synth_prototypes(const SynthSpec& spec) {
    const int coarse = 7;
    mal::CounterRng rng(mal::derive_seed(spec.world_seed, "prototypes"));
    std::vector<std::vector<double>> protos;
    for (int c = 0; c < spec.classes; ++c) {
        std::vector<double> grid(coarse * coarse);
        for (double& v : grid) v = rng.next_uniform(0.05, 0.95);
        std::vector<double> img(spec.side * spec.side);
        for (int y = 0; y < spec.side; ++y) {
            for (int x = 0; x < spec.side; ++x) {
                const double gy = static_cast<double>(y) * (coarse - 1) / (spec.side - 1);
                const double gx = static_cast<double>(x) * (coarse - 1) / (spec.side - 1);
                const int y0 = static_cast<int>(gy), x0 = static_cast<int>(gx);
                const int y1 = std::min(y0 + 1, coarse - 1), x1 = std::min(x0 + 1, coarse - 1);
                const double fy = gy - y0, fx = gx - x0;
                img[y * spec.side + x] =
                    grid[y0 * coarse + x0] * (1 - fy) * (1 - fx) +
                    grid[y0 * coarse + x1] * (1 - fy) * fx +
                    grid[y1 * coarse + x0] * fy * (1 - fx) + grid[y1 * coarse + x1] * fy * fx;
            }
        }
        protos.push_back(std::move(img));
    }
    return protos;
}

inline int synth_label(int i, const SynthSpec& spec) { return i % spec.classes; }

/// IDX image bytes for n samples of the given split tag.
inline std::vector<std::uint8_t> synth_idx_images(const SynthSpec& spec, int n,
                                                  const std::string& split_tag) {
    const auto protos = synth_prototypes(spec);
    const int dim = spec.side * spec.side;
    mal::CounterRng rng(mal::derive_seed(spec.world_seed, "pixels-" + split_tag));
    std::vector<std::uint8_t> bytes;
    bytes.reserve(16 + static_cast<std::size_t>(n) * dim);
    auto put_u32be = [&](std::uint32_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v >> 24));
        bytes.push_back(static_cast<std::uint8_t>(v >> 16));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
        bytes.push_back(static_cast<std::uint8_t>(v));
    };
    put_u32be(2051);
    put_u32be(static_cast<std::uint32_t>(n));
    put_u32be(static_cast<std::uint32_t>(spec.side));
    put_u32be(static_cast<std::uint32_t>(spec.side));
    for (int i = 0; i < n; ++i) {
        const std::vector<double>& proto = protos[synth_label(i, spec)];
        for (int p = 0; p < dim; ++p) {
            double v = proto[p] + rng.next_uniform(-spec.noise, spec.noise);
            v = std::min(1.0, std::max(0.0, v));
            bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
        }
    }
    return bytes;
}

inline std::vector<std::uint8_t> synth_idx_labels(const SynthSpec& spec, int n) {
    std::vector<std::uint8_t> bytes;
    auto put_u32be = [&](std::uint32_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v >> 24));
        bytes.push_back(static_cast<std::uint8_t>(v >> 16));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
        bytes.push_back(static_cast<std::uint8_t>(v));
    };
    put_u32be(2049);
    put_u32be(static_cast<std::uint32_t>(n));
    for (int i = 0; i < n; ++i)
        bytes.push_back(static_cast<std::uint8_t>(synth_label(i, spec)));
    return bytes;
}

/// A synthetic dataset routed through the production IDX parser.
inline mal::Dataset synth_dataset(const std::string& name, int n, const std::string& split_tag,
                                  const SynthSpec& spec = {}) {
    return mal::dataset_from_idx(name, synth_idx_images(spec, n, split_tag),
                                 synth_idx_labels(spec, n), spec.classes);
}

struct SynthFiles {
    std::filesystem::path train_images, train_labels, test_images, test_labels;
};

/// Writes train/test IDX files under `dir` for CLI-driven tests.
inline SynthFiles write_synth_idx_files(const std::filesystem::path& dir, int n_train, int n_test,
                                        const SynthSpec& spec = {}) {
    std::filesystem::create_directories(dir);
    SynthFiles f;
    f.train_images = dir / "synth-train-images-idx3-ubyte";
    f.train_labels = dir / "synth-train-labels-idx1-ubyte";
    f.test_images = dir / "synth-test-images-idx3-ubyte";
    f.test_labels = dir / "synth-test-labels-idx1-ubyte";
    mal::write_file(f.train_images, synth_idx_images(spec, n_train, "train"));
    mal::write_file(f.train_labels, synth_idx_labels(spec, n_train));
    mal::write_file(f.test_images, synth_idx_images(spec, n_test, "test"));
    mal::write_file(f.test_labels, synth_idx_labels(spec, n_test));
    return f;
}

// ---------------------------------------------------------------------------
// independent oracles

/// Plain re-implementation of the dense ReLU forward pass, kept deliberately
/// separate from the library path it cross-checks.
inline std::vector<double> oracle_forward(const mal::ModelCheckpoint& m,
                                          const std::vector<double>& input) {
    std::vector<double> h = input;
    for (int l = 1; l <= m.depth(); ++l) {
        const int rows = m.arch.widths[l];
        const int cols = m.arch.widths[l - 1];
        std::vector<double> next(rows);
        for (int j = 0; j < rows; ++j) {
            double z = m.biases[l - 1][j];
            for (int k = 0; k < cols; ++k)
                z += static_cast<double>(m.weights[l - 1](j, k)) * h[k];
            next[j] = z;
        }
        if (l < m.depth())
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        h = next;
    }
    return h;
}

// ---------------------------------------------------------------------------
// misc utilities

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("mal-tests-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// gzip compression (test-side counterpart of the transparent decompression).
inline std::vector<std::uint8_t> gzip_bytes(const std::vector<std::uint8_t>& raw) {
    z_stream zs{};
    deflateInit2(&zs, Z_BEST_SPEED, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY);
    std::vector<std::uint8_t> out(raw.size() + 1024);
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    deflate(&zs, Z_FINISH);
    out.resize(out.size() - zs.avail_out);
    deflateEnd(&zs);
    return out;
}

/// Random (seeded) checkpoint with non-trivial biases, for algebra tests.
inline mal::ModelCheckpoint random_checkpoint(const std::vector<int>& widths, std::uint64_t seed) {
    mal::ModelCheckpoint m = mal::init_checkpoint(mal::ArchSpec::from_widths(widths), seed);
    mal::CounterRng rng(mal::derive_seed(seed, "test-bias"));
    for (auto& bias : m.biases)
        for (float& b : bias) b = static_cast<float>(rng.next_uniform(-0.5, 0.5));
    return m;
}

/// Minimal well-formedness check for the generated SVG: XML declaration,
/// balanced tags, quoted attributes.
inline bool xml_well_formed(const std::string& text) {
    if (text.rfind("<?xml", 0) != 0) return false;
    std::vector<std::string> stack;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        if (text.compare(i, 4, "<!--") == 0) {
            const auto end = text.find("-->", i);
            if (end == std::string::npos) return false;
            i = end + 3;
            continue;
        }
        if (text.compare(i, 2, "<?") == 0) {
            const auto end = text.find("?>", i);
            if (end == std::string::npos) return false;
            i = end + 2;
            continue;
        }
        const auto close = text.find('>', i);
        if (close == std::string::npos) return false;
        std::string tag = text.substr(i + 1, close - i - 1);
        const bool closing = !tag.empty() && tag[0] == '/';
        const bool self_closing = !tag.empty() && tag.back() == '/';
        if (closing) {
            tag = tag.substr(1);
            if (stack.empty() || stack.back() != tag) return false;
            stack.pop_back();
        } else if (!self_closing) {
            const auto space = tag.find_first_of(" \t\n");
            stack.push_back(space == std::string::npos ? tag : tag.substr(0, space));
        }
        i = close + 1;
    }
    return stack.empty();
}

} // namespace testsup
