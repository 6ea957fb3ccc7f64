#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <map>

#include "mal/data.hpp"
#include "support/test_support.hpp"

using namespace mal;

namespace {

std::vector<std::uint8_t> idx_image_blob(const std::vector<std::uint8_t>& pixels, int n, int rows,
                                         int cols, std::uint32_t magic = 2051) {
    std::vector<std::uint8_t> bytes;
    auto put = [&](std::uint32_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v >> 24));
        bytes.push_back(static_cast<std::uint8_t>(v >> 16));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
        bytes.push_back(static_cast<std::uint8_t>(v));
    };
    put(magic);
    put(n);
    put(rows);
    put(cols);
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    return bytes;
}

std::vector<std::uint8_t> idx_label_blob(const std::vector<std::uint8_t>& labels,
                                         std::uint32_t magic = 2049) {
    std::vector<std::uint8_t> bytes;
    auto put = [&](std::uint32_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v >> 24));
        bytes.push_back(static_cast<std::uint8_t>(v >> 16));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
        bytes.push_back(static_cast<std::uint8_t>(v));
    };
    put(magic);
    put(static_cast<std::uint32_t>(labels.size()));
    bytes.insert(bytes.end(), labels.begin(), labels.end());
    return bytes;
}

// test-side serializer for the round-trip property
std::vector<std::uint8_t> idx_bytes_from(const MatF& features, int rows, int cols) {
    std::vector<std::uint8_t> pixels;
    for (float v : features.data)
        pixels.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    return idx_image_blob(pixels, features.rows, rows, cols);
}

} // namespace

TEST_CASE("hand-built 1-image IDX blob parses bit-exactly", "[data]") {
    const auto blob = idx_image_blob({0, 255, 128, 64}, 1, 2, 2);
    const MatF features = parse_idx_images(blob);
    REQUIRE(features.rows == 1);
    REQUIRE(features.cols == 4);
    REQUIRE(features(0, 0) == 0.0f);
    REQUIRE(features(0, 1) == 1.0f);
    REQUIRE(features(0, 2) == static_cast<float>(128 / 255.0));
    REQUIRE(features(0, 3) == static_cast<float>(64 / 255.0));
}

TEST_CASE("IDX error paths", "[data]") {
    const auto good = idx_image_blob({0, 255, 128, 64}, 1, 2, 2);
    auto wrong_magic = idx_image_blob({0, 255, 128, 64}, 1, 2, 2, 2052);
    REQUIRE_THROWS_AS(parse_idx_images(wrong_magic), FormatError);

    auto truncated = good;
    truncated.pop_back();
    REQUIRE_THROWS_AS(parse_idx_images(truncated), FormatError);

    auto trailing = good;
    trailing.push_back(0);
    REQUIRE_THROWS_AS(parse_idx_images(trailing), FormatError);

    REQUIRE_THROWS_AS(parse_idx_labels(good), FormatError); // image magic on label parser
}

TEST_CASE("label bytes above the downstream class count are parser-legal", "[data]") {
    const auto blob = idx_label_blob({0, 7, 42});
    const std::vector<int> labels = parse_idx_labels(blob);
    REQUIRE(labels == std::vector<int>{0, 7, 42});
    // semantics are assigned downstream: a 10-class dataset now rejects it
    const auto images = idx_image_blob(std::vector<std::uint8_t>(3 * 4, 0), 3, 2, 2);
    REQUIRE_THROWS_AS(dataset_from_idx("x", images, blob, 10), ConfigError);
}

TEST_CASE("constructed CIFAR-10 record", "[data]") {
    std::vector<std::uint8_t> record(3073, 255);
    record[0] = 7;
    const Dataset d = parse_cifar10(record);
    REQUIRE(d.size() == 1);
    REQUIRE(d.input_dim() == 3072);
    REQUIRE(d.labels[0] == 7);
    for (float v : d.features.data) REQUIRE(v == 1.0f);

    std::vector<std::uint8_t> bad(3073 + 100, 0);
    REQUIRE_THROWS_WITH(parse_cifar10(bad), Catch::Matchers::ContainsSubstring("remainder 100"));
}

TEST_CASE("constructed CIFAR-100 records honor the label kind", "[data]") {
    std::vector<std::uint8_t> record(3074, 10);
    record[0] = 19; // coarse
    record[1] = 99; // fine
    const Dataset fine = parse_cifar100(record, Cifar100Labels::Fine);
    REQUIRE(fine.num_classes == 100);
    REQUIRE(fine.labels[0] == 99);
    const Dataset coarse = parse_cifar100(record, Cifar100Labels::Coarse);
    REQUIRE(coarse.num_classes == 20);
    REQUIRE(coarse.labels[0] == 19);
}

TEST_CASE("round-trip through the test serializer is bit-exact", "[data]") {
    testsup::SynthSpec spec;
    const auto original = testsup::synth_idx_images(spec, 12, "train");
    const MatF parsed = parse_idx_images(original);
    REQUIRE(idx_bytes_from(parsed, spec.side, spec.side) == original);
}

TEST_CASE("gzip-compressed files parse transparently", "[data]") {
    const auto dir = testsup::fresh_temp_dir("gz");
    const auto blob = idx_image_blob({0, 255, 128, 64}, 1, 2, 2);
    write_file(dir / "img.idx.gz", testsup::gzip_bytes(blob));
    const auto loaded = read_maybe_gz(dir / "img.idx");
    REQUIRE(loaded == blob);
    std::filesystem::remove_all(dir);
}

TEST_CASE("parsed features stay in [0,1] and labels in range", "[data]") {
    const Dataset d = testsup::synth_dataset("synth", 50, "train");
    d.validate();
    for (float v : d.features.data) {
        REQUIRE(v >= 0.0f);
        REQUIRE(v <= 1.0f);
    }
}

TEST_CASE("subsample stratification", "[data]") {
    const Dataset d = testsup::synth_dataset("synth", 100, "train"); // balanced 10 classes

    SECTION("n = N keeps every sample (up to reordering)") {
        const Dataset s = subsample(d, 100, 1);
        REQUIRE(s.size() == 100);
        std::map<int, int> histogram;
        for (int label : s.labels) ++histogram[label];
        for (auto [label, count] : histogram) REQUIRE(count == 10);
    }

    SECTION("n = num_classes picks exactly one per class") {
        const Dataset s = subsample(d, 10, 1);
        std::map<int, int> histogram;
        for (int label : s.labels) ++histogram[label];
        REQUIRE(histogram.size() == 10);
        for (auto [label, count] : histogram) REQUIRE(count == 1);
    }

    SECTION("same seed is reproducible, class histogram within 1 of uniform") {
        const Dataset s1 = subsample(d, 37, 5);
        const Dataset s2 = subsample(d, 37, 5);
        REQUIRE(s1.labels == s2.labels);
        REQUIRE(s1.features.data == s2.features.data);
        std::map<int, int> histogram;
        for (int label : s1.labels) ++histogram[label];
        for (auto [label, count] : histogram) {
            REQUIRE(count >= 3);
            REQUIRE(count <= 4);
        }
    }

    SECTION("error paths") {
        REQUIRE_THROWS_AS(subsample(d, 5, 1), ConfigError);   // below class count
        REQUIRE_THROWS_AS(subsample(d, 101, 1), ConfigError); // above dataset size
    }
}

TEST_CASE("official MNIST files, when available", "[data][official]") {
    const char* root = std::getenv("MAL_DATA_ROOT");
    if (!root || !std::filesystem::exists(std::filesystem::path(root) / "mnist")) {
        SKIP("MAL_DATA_ROOT with mnist/ not present");
    }
    const Dataset train = load_standard_dataset(root, "mnist", "train");
    REQUIRE(train.size() == 60000);
    REQUIRE(train.input_dim() == 784);
    REQUIRE(train.num_classes == 10);
}
