#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "a2hash/tensor.hpp"

namespace a2 {

struct ModelParams;

enum class Split : std::uint8_t { train = 0, database = 1, query = 2 };

// In-memory dataset: image blob (CHW float32 in [0,1]), one class label and
// one split tag per item, optional per-item attribute-id sets.
struct DatasetManifest {
    int c = 0, h = 0, w = 0;
    std::uint32_t class_count = 0;
    std::vector<float> images;  // count * c * h * w
    std::vector<std::uint32_t> labels;
    std::vector<std::vector<std::uint32_t>> attributes;  // empty if absent
    std::vector<Split> splits;
    // Rows belonging to the "simple" top part when built by concatenation;
    // 0 for ordinary datasets.
    std::uint32_t concat_boundary = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t pixels_per_item() const {
        return static_cast<std::size_t>(c) * h * w;
    }
    void validate() const;

    std::vector<std::size_t> items_with_split(Split s) const;
    // (n,C,H,W) batch of 64-bit reals for the given item indices.
    Tensor batch(std::span<const std::size_t> items) const;
};

// Dataset directory: images.bin ("A2DS" blob), labels.bin, splits.bin,
// meta.bin, optional attributes.bin. Round-trips are byte-exact.
void save_manifest(const DatasetManifest& m, const std::string& dir);
DatasetManifest load_manifest(const std::string& dir);

// Class-conditional synthetic images: shared background plus class-specific
// localized attribute patterns whose contrast drops as difficulty rises.
// Items are split per class, one sixth to query and the rest to database.
DatasetManifest make_synthetic(int classes, int per_class, int c, int h, int w,
                               double difficulty, std::uint64_t seed);

struct ConcatSpec {
    const DatasetManifest* simple = nullptr;
    const DatasetManifest* complex_part = nullptr;
};

// Vertical concatenation, simple part on top; class c pairs the two sources'
// class c. Items are paired within the same split.
DatasetManifest make_concat_dataset(const ConcatSpec& spec, std::uint64_t seed);

enum class ConcatPart { simple, complex_part };

// Zeroes the pixels of the *other* part, keeping the image shape.
DatasetManifest mask_part(const DatasetManifest& m, ConcatPart keep);

// Channel-summed absolute backbone activation, nearest-upsampled to the
// image size and min-max normalized; written as <base>.pgm and <base>.csv.
// Returns the normalized heatmap (h x w, row-major).
std::vector<double> activation_heatmap(ModelParams& params, const Tensor& image,
                                       const std::string& out_base);

// Standard external formats, for running on real data.
// IDX (as distributed for MNIST): images scaled to [0,1], single channel.
DatasetManifest load_idx(const std::string& images_path,
                         const std::string& labels_path);
// CIFAR-10 binary batch: 3x32x32 records.
DatasetManifest load_cifar_batch(const std::string& path);

}  // namespace a2
