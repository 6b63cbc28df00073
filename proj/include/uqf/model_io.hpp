#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uqf/network.hpp"

namespace uqf {

// Portable model file ("PNF1"):
//
//   offset 0   magic "PNF1"
//   offset 4   header_length, uint32 little-endian
//   offset 8   header, UTF-8 JSON (header_length bytes)
//   then       payload: float32 little-endian blobs, row-major, in the order
//              the header declares them (layer order, then "tensors" order)
//
// Header keys: "endianness" ("little"), "dense_weight_layout" ("out_in"),
// "input_shape", "class_count", "layers". Each layer has "kind", its
// hyperparameters, and for dense/conv2d a "tensors" list of {name, shape}:
// dense = weight [out_dim, in_dim], bias [out_dim];
// conv2d = kernel [kernel_h, kernel_w, in_ch, out_ch], bias [out_ch].

inline constexpr char kModelMagic[4] = {'P', 'N', 'F', '1'};

std::vector<std::uint8_t> serialize_model(const Network& net);
/// Throws FormatError with the byte offset of the first inconsistency.
Network deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const Network& net, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes via a temporary file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace uqf
