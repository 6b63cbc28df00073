#include "uqf/dataset_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uqf/error.hpp"
#include "uqf/model_io.hpp"

namespace uqf {

namespace {

constexpr std::uint32_t kIdxImagesU8 = 0x00000803;
constexpr std::uint32_t kIdxImagesF32 = 0x00000D03;
constexpr std::uint32_t kIdxImagesU8Rgb = 0x00000804;
constexpr std::uint32_t kIdxImagesF32Rgb = 0x00000D04;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::uint32_t get_u32_be(std::span<const std::uint8_t> b, std::size_t off) {
  if (off + 4 > b.size()) throw FormatError("IDX header truncated", b.size());
  return static_cast<std::uint32_t>(b[off]) << 24 | static_cast<std::uint32_t>(b[off + 1]) << 16 |
         static_cast<std::uint32_t>(b[off + 2]) << 8 | static_cast<std::uint32_t>(b[off + 3]);
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::string hex32(std::uint32_t v) {
  std::ostringstream s;
  s << "0x" << std::hex;
  s.width(8);
  s.fill('0');
  s << v;
  return s.str();
}

}  // namespace

LabeledDataset parse_idx(std::span<const std::uint8_t> img, std::span<const std::uint8_t> lab, std::string provenance) {
  const std::uint32_t magic = get_u32_be(img, 0);
  if (magic != kIdxImagesU8 && magic != kIdxImagesF32 && magic != kIdxImagesU8Rgb && magic != kIdxImagesF32Rgb) {
    throw FormatError("images: bad IDX magic " + hex32(magic) + ", expected 0x00000803", 0);
  }
  const bool is_float = (magic >> 8) == 0x0D;
  const std::size_t ndims = magic & 0xFF;
  Shape shape;
  for (std::size_t d = 0; d < ndims; ++d) {
    const std::uint32_t dim = get_u32_be(img, 4 + 4 * d);
    if (dim == 0) throw FormatError("images: zero dimension " + std::to_string(d), 4 + 4 * d);
    shape.push_back(dim);
  }
  if (ndims == 3) shape.push_back(1);
  const std::size_t header = 4 + 4 * ndims;
  const std::size_t elem = is_float ? 4 : 1;
  const std::size_t count = shape_size(shape);
  if (img.size() != header + count * elem) {
    throw FormatError("images: expected " + std::to_string(header + count * elem) + " bytes for shape " +
                          shape_to_string(shape) + ", file has " + std::to_string(img.size()),
                      std::min(img.size(), header + count * elem));
  }
  std::vector<float> pixels(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (is_float) {
      const float v = std::bit_cast<float>(get_u32_be(img, header + 4 * i));
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw FormatError("images: float pixel outside [0,1]", header + 4 * i);
      }
      pixels[i] = v;
    } else {
      pixels[i] = static_cast<float>(img[header + i]) / 255.0f;
    }
  }

  const std::uint32_t lmagic = get_u32_be(lab, 0);
  if (lmagic != kIdxLabels) throw FormatError("labels: bad IDX magic " + hex32(lmagic) + ", expected 0x00000801", 0);
  const std::uint32_t nlab = get_u32_be(lab, 4);
  if (nlab != shape[0]) {
    throw FormatError("label count " + std::to_string(nlab) + " does not match image count " +
                          std::to_string(shape[0]),
                      4);
  }
  if (lab.size() != 8 + static_cast<std::size_t>(nlab)) {
    throw FormatError("labels: expected " + std::to_string(8 + nlab) + " bytes, file has " + std::to_string(lab.size()),
                      std::min<std::size_t>(lab.size(), 8 + nlab));
  }
  std::vector<std::size_t> labels(lab.begin() + 8, lab.end());
  return {Tensor(std::move(shape), std::move(pixels)), std::move(labels), std::move(provenance)};
}

LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  return parse_idx(read_file_bytes(images_path), read_file_bytes(labels_path), images_path.filename().string());
}

std::vector<std::uint8_t> encode_idx_images(const Tensor& images, IdxPixelType type) {
  if (images.rank() != 4 && images.rank() != 3) throw ShapeError("IDX images need shape [n,rows,cols(,ch)]");
  const bool gray = images.rank() == 3 || images.shape()[3] == 1;
  const std::size_t dims = gray ? 3 : 4;
  std::vector<std::uint8_t> out;
  const std::uint32_t dtype = type == IdxPixelType::float32 ? 0x0D : 0x08;
  put_u32_be(out, (dtype << 8) | static_cast<std::uint32_t>(dims));
  for (std::size_t d = 0; d < dims; ++d) put_u32_be(out, static_cast<std::uint32_t>(images.shape()[d]));
  for (float v : images.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ShapeError("pixel outside [0,1] cannot be stored in IDX");
    if (type == IdxPixelType::float32) {
      put_u32_be(out, std::bit_cast<std::uint32_t>(v));
    } else {
      out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::size_t>& labels) {
  std::vector<std::uint8_t> out;
  put_u32_be(out, kIdxLabels);
  put_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  for (auto l : labels) {
    if (l > 255) throw ConfigError("IDX labels must fit in one byte");
    out.push_back(static_cast<std::uint8_t>(l));
  }
  return out;
}

void save_idx(const LabeledDataset& data, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path, IdxPixelType type) {
  write_file_atomic(images_path, encode_idx_images(data.images, type));
  write_file_atomic(labels_path, encode_idx_labels(data.labels));
}

LabeledDataset load_csv(const std::filesystem::path& path, std::optional<Shape> sample_shape) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<float> values;
  std::vector<std::size_t> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::uint64_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() < 2) throw FormatError("CSV line " + std::to_string(line_no) + ": need label and pixels", line_offset);
    if (width == 0) width = cells.size() - 1;
    if (cells.size() - 1 != width) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " pixels",
                        line_offset);
    }
    std::size_t label = 0;
    auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), label);
    if (ec != std::errc() || p != cells[0].data() + cells[0].size()) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": label is not a non-negative integer", line_offset);
    }
    labels.push_back(label);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      float v = 0.0f;
      try {
        v = std::stof(std::string(cells[c]));
      } catch (const std::exception&) {
        throw FormatError("CSV line " + std::to_string(line_no) + ": bad number", line_offset);
      }
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw FormatError("CSV line " + std::to_string(line_no) + ": pixel outside [0,1]", line_offset);
      }
      values.push_back(v);
    }
  }
  if (labels.empty()) throw FormatError("CSV has no data rows", 0);
  Shape sample = sample_shape.value_or(Shape{width});
  if (shape_size(sample) != width) {
    throw ShapeError("CSV rows have " + std::to_string(width) + " pixels, sample shape " + shape_to_string(sample) +
                     " needs " + std::to_string(shape_size(sample)));
  }
  Shape shape{labels.size()};
  shape.insert(shape.end(), sample.begin(), sample.end());
  return {Tensor(std::move(shape), std::move(values)), std::move(labels), path.filename().string()};
}

LabeledDataset load_dataset_spec(const std::string& spec) {
  const auto comma = spec.find(',');
  if (comma == std::string::npos) {
    if (spec.size() >= 4 && spec.substr(spec.size() - 4) == ".csv") return load_csv(spec);
    throw ConfigError("dataset must be 'images.idx,labels.idx' or a .csv file, got '" + spec + "'");
  }
  return load_idx(spec.substr(0, comma), spec.substr(comma + 1));
}

}  // namespace uqf
