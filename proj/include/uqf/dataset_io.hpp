#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "uqf/dataset.hpp"

namespace uqf {

// IDX (big-endian). Images: magic 0x00000803 (unsigned bytes, divided by 255)
// or 0x00000D03 (float32 in [0,1]); dims n, rows, cols. A fourth dimension is
// read as channels. Labels: magic 0x00000801, dim n.

LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
LabeledDataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes,
                         std::string provenance = "idx");

enum class IdxPixelType { ubyte, float32 };

/// Float images are stored losslessly; ubyte rounds x * 255.
std::vector<std::uint8_t> encode_idx_images(const Tensor& images, IdxPixelType type);
std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::size_t>& labels);
void save_idx(const LabeledDataset& data, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path, IdxPixelType type = IdxPixelType::float32);

/// CSV rows "label,p0,p1,...". Lines starting with '#' are skipped. Without a
/// sample shape, samples are flat vectors.
LabeledDataset load_csv(const std::filesystem::path& path, std::optional<Shape> sample_shape = std::nullopt);

/// "images.idx,labels.idx" or a single ".csv" path.
LabeledDataset load_dataset_spec(const std::string& spec);

}  // namespace uqf
