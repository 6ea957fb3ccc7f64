#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mal/data.hpp"
#include "mal/errors.hpp"
#include "mal/nn.hpp"
#include "mal/parallel.hpp"

namespace mal {

inline nlohmann::json arch_to_json(const ArchSpec& arch) {
    return {{"widths", arch.widths}, {"activation", "relu"}, {"family", family_name(arch.family)}};
}

inline ArchSpec arch_from_json(const nlohmann::json& j) {
    ArchSpec arch = ArchSpec::from_widths(j.at("widths").get<std::vector<int>>());
    if (j.value("activation", "relu") != "relu")
        throw FormatError("unsupported activation '" + j.value("activation", "") + "'");
    const std::string fam = j.value("family", "");
    if (!fam.empty() && family_from_name(fam) != arch.family)
        throw FormatError("arch family '" + fam + "' is inconsistent with widths");
    return arch;
}

inline nlohmann::json meta_to_json(const TrainMeta& meta) {
    return {{"dataset_id", meta.dataset_id}, {"seed", meta.seed},
            {"learning_rate", meta.learning_rate}, {"epochs", meta.epochs},
            {"final_loss", meta.final_loss}, {"final_accuracy", meta.final_accuracy}};
}

inline TrainMeta meta_from_json(const nlohmann::json& j) {
    TrainMeta meta;
    meta.dataset_id = j.value("dataset_id", "");
    meta.seed = j.value("seed", std::uint64_t{0});
    meta.learning_rate = j.value("learning_rate", 0.0);
    meta.epochs = j.value("epochs", 0);
    meta.final_loss = j.value("final_loss", 0.0);
    meta.final_accuracy = j.value("final_accuracy", 0.0);
    return meta;
}

namespace detail {

inline void put_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64le(ByteSpan bytes, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    return v;
}

inline void put_f32le(std::vector<std::uint8_t>& out, float f) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

inline float get_f32le(ByteSpan bytes, std::size_t pos) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    return std::bit_cast<float>(bits);
}

} // namespace detail

/// Checkpoint container layout, version-stable and bit-exact:
///   8-byte little-endian header length N,
///   N bytes of UTF-8 JSON mapping tensor names "w1","b1",…,"wL","bL" to
///   {dtype:"f32", shape:[…], offset_begin, offset_end} plus "arch" and
///   "meta" objects (keys serialized in sorted order, compact separators),
///   then the raw tensor payload: little-endian f32, row-major, tensors laid
///   out contiguously in w1,b1,w2,b2,… order starting at offset 0.
inline std::vector<std::uint8_t> checkpoint_to_bytes(const ModelCheckpoint& model) {
    model.validate();
    nlohmann::json header;
    header["arch"] = arch_to_json(model.arch);
    header["meta"] = meta_to_json(model.meta);
    std::uint64_t offset = 0;
    const int L = model.depth();
    for (int l = 1; l <= L; ++l) {
        const MatF& w = model.weights[l - 1];
        const std::uint64_t wbytes = w.size() * 4;
        header["w" + std::to_string(l)] = {{"dtype", "f32"},
                                           {"shape", {w.rows, w.cols}},
                                           {"offset_begin", offset},
                                           {"offset_end", offset + wbytes}};
        offset += wbytes;
        const std::uint64_t bbytes = model.biases[l - 1].size() * 4;
        header["b" + std::to_string(l)] = {{"dtype", "f32"},
                                           {"shape", {static_cast<int>(model.biases[l - 1].size())}},
                                           {"offset_begin", offset},
                                           {"offset_end", offset + bbytes}};
        offset += bbytes;
    }
    const std::string header_str = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(8 + header_str.size() + offset);
    detail::put_u64le(out, header_str.size());
    out.insert(out.end(), header_str.begin(), header_str.end());
    for (int l = 1; l <= L; ++l) {
        for (float v : model.weights[l - 1].data) detail::put_f32le(out, v);
        for (float v : model.biases[l - 1]) detail::put_f32le(out, v);
    }
    return out;
}

inline ModelCheckpoint checkpoint_from_bytes(ByteSpan bytes) {
    if (bytes.size() < 8)
        throw FormatError("checkpoint container is " + std::to_string(bytes.size()) +
                          " bytes; need at least the 8-byte header length");
    const std::uint64_t header_len = detail::get_u64le(bytes, 0);
    if (8 + header_len > bytes.size())
        throw FormatError("header declares " + std::to_string(header_len) +
                          " bytes at offset 8 but the file holds " +
                          std::to_string(bytes.size() - 8) + " more bytes");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("arch") || !header.contains("meta"))
        throw FormatError("checkpoint header lacks the arch/meta objects");

    ModelCheckpoint model;
    model.arch = arch_from_json(header.at("arch"));
    model.meta = meta_from_json(header.at("meta"));

    const std::size_t payload_begin = 8 + header_len;
    const std::uint64_t payload_len = bytes.size() - payload_begin;
    const int L = model.depth();
    std::uint64_t expected_offset = 0;
    auto read_tensor = [&](const std::string& name, int want_rows, int want_cols,
                           bool is_matrix) -> std::vector<float> {
        if (!header.contains(name)) throw FormatError("checkpoint header lacks tensor " + name);
        const nlohmann::json& t = header.at(name);
        if (t.value("dtype", "") != "f32")
            throw FormatError("tensor " + name + " has dtype '" + t.value("dtype", "") +
                              "', only f32 is supported");
        const auto shape = t.at("shape").get<std::vector<int>>();
        const std::uint64_t begin = t.at("offset_begin").get<std::uint64_t>();
        const std::uint64_t end = t.at("offset_end").get<std::uint64_t>();
        if (begin != expected_offset)
            throw FormatError("tensor " + name + " begins at payload offset " +
                              std::to_string(begin) + ", expected " +
                              std::to_string(expected_offset) + " (offsets must be contiguous)");
        if (end < begin)
            throw FormatError("tensor " + name + " has offset_end before offset_begin");
        const bool shape_ok = is_matrix ? (shape.size() == 2 && shape[0] == want_rows &&
                                           shape[1] == want_cols)
                                        : (shape.size() == 1 && shape[0] == want_rows);
        if (!shape_ok)
            throw FormatError("tensor " + name + " shape does not match the declared arch");
        const std::uint64_t count =
            is_matrix ? std::uint64_t(want_rows) * want_cols : std::uint64_t(want_rows);
        if (end - begin != count * 4)
            throw FormatError("tensor " + name + " spans " + std::to_string(end - begin) +
                              " bytes, shape needs " + std::to_string(count * 4));
        if (end > payload_len)
            throw FormatError("tensor " + name + " ends at payload offset " + std::to_string(end) +
                              " but the payload holds only " + std::to_string(payload_len) +
                              " bytes (file offset " + std::to_string(payload_begin + payload_len) +
                              ")");
        std::vector<float> values(count);
        for (std::uint64_t i = 0; i < count; ++i)
            values[i] = detail::get_f32le(bytes, payload_begin + begin + i * 4);
        expected_offset = end;
        return values;
    };

    for (int l = 1; l <= L; ++l) {
        const int rows = model.arch.widths[l], cols = model.arch.widths[l - 1];
        MatF w(rows, cols);
        w.data = read_tensor("w" + std::to_string(l), rows, cols, true);
        model.weights.push_back(std::move(w));
        model.biases.push_back(read_tensor("b" + std::to_string(l), rows, 0, false));
    }
    if (expected_offset != payload_len)
        throw FormatError("payload is " + std::to_string(payload_len) +
                          " bytes but tensors end at " + std::to_string(expected_offset));
    model.validate();
    return model;
}

/// Lossless round-trip: load(save(m)) is bit-identical to m.
inline void save_checkpoint(const ModelCheckpoint& model, const std::filesystem::path& path) {
    write_file(path, checkpoint_to_bytes(model));
}

inline ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_bytes(read_file(path));
}

struct ZooEntry {
    std::string id;
    std::string path; // relative to the zoo directory
    std::string status = "ok";
    ArchSpec arch;
    std::string dataset_id;
    std::uint64_t seed = 0;
    double learning_rate = 0.0;
    double final_loss = 0.0;
    double final_accuracy = 0.0;
    std::string error; // for failed entries
};

/// Index of trained checkpoints driving the assembly loop; one manifest.json
/// per zoo directory.
struct ZooManifest {
    int version = 1;
    std::vector<ZooEntry> entries;
};

inline nlohmann::json manifest_to_json(const ZooManifest& manifest) {
    nlohmann::json entries = nlohmann::json::array();
    for (const ZooEntry& e : manifest.entries) {
        nlohmann::json j = {{"id", e.id}, {"status", e.status}, {"dataset_id", e.dataset_id},
                            {"seed", e.seed}};
        if (e.status == "ok") {
            j["path"] = e.path;
            j["arch"] = arch_to_json(e.arch);
            j["learning_rate"] = e.learning_rate;
            j["final_loss"] = e.final_loss;
            j["final_accuracy"] = e.final_accuracy;
        } else {
            j["error"] = e.error;
        }
        entries.push_back(std::move(j));
    }
    return {{"version", 1}, {"entries", entries}};
}

inline ZooManifest manifest_from_json(const nlohmann::json& j) {
    ZooManifest manifest;
    manifest.version = j.value("version", 0);
    if (manifest.version != 1)
        throw FormatError("unsupported manifest version " + std::to_string(manifest.version));
    std::vector<std::string> ids;
    for (const auto& ej : j.at("entries")) {
        ZooEntry e;
        e.id = ej.at("id").get<std::string>();
        e.status = ej.value("status", "ok");
        e.dataset_id = ej.value("dataset_id", "");
        e.seed = ej.value("seed", std::uint64_t{0});
        if (e.status == "ok") {
            e.path = ej.at("path").get<std::string>();
            e.arch = arch_from_json(ej.at("arch"));
            e.learning_rate = ej.value("learning_rate", 0.0);
            e.final_loss = ej.value("final_loss", 0.0);
            e.final_accuracy = ej.value("final_accuracy", 0.0);
        } else {
            e.error = ej.value("error", "");
        }
        ids.push_back(e.id);
        manifest.entries.push_back(std::move(e));
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw FormatError("manifest contains duplicate entry ids");
    return manifest;
}

inline std::filesystem::path manifest_path(const std::filesystem::path& zoo_dir) {
    return zoo_dir / "manifest.json";
}

inline void save_manifest(const ZooManifest& manifest, const std::filesystem::path& zoo_dir) {
    std::filesystem::create_directories(zoo_dir);
    const std::string text = manifest_to_json(manifest).dump(2) + "\n";
    write_file(manifest_path(zoo_dir),
               ByteSpan(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline ZooManifest load_manifest(const std::filesystem::path& zoo_dir) {
    const auto bytes = read_file(manifest_path(zoo_dir));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    return manifest_from_json(j);
}

struct ZooFilter {
    std::optional<std::string> dataset_id;
    std::optional<Family> family;
    std::optional<std::int64_t> max_params;
    std::optional<double> min_accuracy;
};

inline std::int64_t param_count(const ArchSpec& arch) {
    std::int64_t count = 0;
    for (int l = 1; l <= arch.depth(); ++l)
        count += std::int64_t(arch.widths[l]) * arch.widths[l - 1] + arch.widths[l];
    return count;
}

/// Conjunction of the given filters over the loadable ("ok") entries,
/// returned in ascending id order.
inline std::vector<ZooEntry> query(const ZooManifest& manifest, const ZooFilter& filter) {
    std::vector<ZooEntry> out;
    for (const ZooEntry& e : manifest.entries) {
        if (e.status != "ok") continue;
        if (filter.dataset_id && e.dataset_id != *filter.dataset_id) continue;
        if (filter.family && e.arch.family != *filter.family) continue;
        if (filter.max_params && param_count(e.arch) > *filter.max_params) continue;
        if (filter.min_accuracy && e.final_accuracy < *filter.min_accuracy) continue;
        out.push_back(e);
    }
    std::sort(out.begin(), out.end(),
              [](const ZooEntry& a, const ZooEntry& b) { return a.id < b.id; });
    return out;
}

/// One dataset of the training grid: the split models train on plus the
/// held-out split that picks the better learning rate.
struct ZooDataset {
    std::string id;
    Dataset train;
    Dataset heldout;
};

struct ZooBuildConfig {
    std::vector<std::vector<int>> hidden_archs;
    std::vector<ZooDataset> datasets;
    std::vector<std::uint64_t> seeds;
    std::vector<double> learning_rates = {1e-4, 1e-3};
    int epochs = 10;
    int batch_size = 32;
    int threads = 1;
};

inline std::string zoo_entry_id(const std::string& dataset_id, const ArchSpec& arch,
                                std::uint64_t seed) {
    return dataset_id + "_" + arch.label() + "_s" + std::to_string(seed);
}

/// Trains the cartesian grid (arch × dataset × seed), trying every configured
/// learning rate and keeping the one with the lowest held-out loss. Jobs run
/// in parallel up to config.threads; the manifest is assembled and written
/// once, in deterministic job order. Existing ok entries whose checkpoint
/// file is still present are skipped, so interrupted builds resume.
inline ZooManifest build_zoo(const ZooBuildConfig& config, const std::filesystem::path& out_dir) {
    if (config.learning_rates.empty()) throw ConfigError("build_zoo: no learning rates configured");
    std::filesystem::create_directories(out_dir);

    std::map<std::string, ZooEntry> existing;
    if (std::filesystem::exists(manifest_path(out_dir))) {
        for (ZooEntry& e : load_manifest(out_dir).entries) existing[e.id] = std::move(e);
    }

    struct Job {
        std::string id;
        ArchSpec arch;
        const ZooDataset* data;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const ZooDataset& ds : config.datasets) {
        ds.train.validate();
        for (const std::vector<int>& hidden : config.hidden_archs) {
            std::vector<int> widths;
            widths.push_back(ds.train.input_dim());
            widths.insert(widths.end(), hidden.begin(), hidden.end());
            widths.push_back(ds.train.num_classes);
            const ArchSpec arch = ArchSpec::from_widths(widths);
            for (std::uint64_t seed : config.seeds)
                jobs.push_back({zoo_entry_id(ds.id, arch, seed), arch, &ds, seed});
        }
    }

    std::vector<ZooEntry> results(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), config.threads, [&](int i) {
        const Job& job = jobs[i];
        ZooEntry entry;
        entry.id = job.id;
        entry.dataset_id = job.data->id;
        entry.seed = job.seed;

        if (auto it = existing.find(job.id); it != existing.end() && it->second.status == "ok" &&
                                             std::filesystem::exists(out_dir / it->second.path)) {
            results[i] = it->second;
            return;
        }

        std::optional<ModelCheckpoint> best;
        double best_heldout = 0.0;
        std::string last_error;
        for (double lr : config.learning_rates) {
            Hyperparams hp{lr, config.epochs, config.batch_size, job.seed};
            try {
                ModelCheckpoint model = train_sgd(job.arch, job.data->train, hp);
                const double heldout = loss_and_accuracy(model, job.data->heldout).first;
                if (!best || heldout < best_heldout) {
                    best = std::move(model);
                    best_heldout = heldout;
                }
            } catch (const Error& e) {
                last_error = e.what();
            }
        }
        if (!best) {
            entry.status = "failed";
            entry.error = last_error.empty() ? "no learning rate produced a model" : last_error;
            results[i] = std::move(entry);
            return;
        }
        entry.path = job.id + ".ckpt";
        entry.arch = best->arch;
        entry.learning_rate = best->meta.learning_rate;
        entry.final_loss = best->meta.final_loss;
        entry.final_accuracy = best->meta.final_accuracy;
        save_checkpoint(*best, out_dir / entry.path);
        results[i] = std::move(entry);
    });

    ZooManifest manifest;
    std::vector<std::string> job_ids;
    for (const Job& j : jobs) job_ids.push_back(j.id);
    // keep entries that predate this config, then the grid in job order
    for (auto& [id, entry] : existing)
        if (std::find(job_ids.begin(), job_ids.end(), id) == job_ids.end())
            manifest.entries.push_back(entry);
    for (ZooEntry& e : results) manifest.entries.push_back(std::move(e));
    save_manifest(manifest, out_dir);
    return manifest;
}

} // namespace mal
