#include "uqf/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "uqf/error.hpp"

namespace uqf {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_f32_le(std::vector<std::uint8_t>& out, float v) { put_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

json tensor_entry(const char* name, const Tensor& t) { return {{"name", name}, {"shape", t.shape()}}; }

json layer_header(const Layer& layer) {
  json j;
  j["kind"] = std::string(kind_name(kind_of(layer)));
  if (auto* d = std::get_if<DenseLayer>(&layer)) {
    j["in_dim"] = d->in_dim;
    j["out_dim"] = d->out_dim;
    j["tensors"] = json::array({tensor_entry("weight", d->weight), tensor_entry("bias", d->bias)});
  } else if (auto* c = std::get_if<Conv2dLayer>(&layer)) {
    j["kernel_h"] = c->kernel_h;
    j["kernel_w"] = c->kernel_w;
    j["in_ch"] = c->in_ch;
    j["out_ch"] = c->out_ch;
    j["stride"] = c->stride;
    j["padding"] = c->padding;
    j["tensors"] = json::array({tensor_entry("kernel", c->kernel), tensor_entry("bias", c->bias)});
  } else if (auto* p = std::get_if<MaxPool2dLayer>(&layer)) {
    j["window"] = p->window;
    j["stride"] = p->stride;
  } else if (auto* dr = std::get_if<DropoutLayer>(&layer)) {
    j["rate"] = dr->rate;
  }
  return j;
}

std::size_t get_dim(const json& j, const char* key, std::uint64_t offset) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) {
    throw FormatError(std::string("header: layer field '") + key + "' missing or not a non-negative integer", offset);
  }
  return j[key].get<std::size_t>();
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Network& net) {
  json header;
  header["endianness"] = "little";
  header["dense_weight_layout"] = "out_in";
  header["input_shape"] = net.input_shape();
  header["class_count"] = net.class_count();
  header["layers"] = json::array();
  for (const auto& layer : net.layers()) header["layers"].push_back(layer_header(layer));
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kModelMagic, kModelMagic + 4);
  put_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& layer : net.layers()) {
    for (const Tensor* t : layer_parameters(layer)) {
      for (float v : t->values()) put_f32_le(out, v);
    }
  }
  return out;
}

Network deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("file too short for PNF magic and header length", bytes.size());
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) throw FormatError("bad magic, expected \"PNF1\"", 0);
  const std::uint64_t header_len = get_u32_le(bytes.data() + 4);
  if (8 + header_len > bytes.size()) {
    throw FormatError("header length " + std::to_string(header_len) + " exceeds file size " +
                          std::to_string(bytes.size()) + " (header length must be little-endian)",
                      4);
  }
  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("header is not valid JSON: ") + e.what(), 8 + e.byte);
  }
  if (!header.is_object()) throw FormatError("header must be a JSON object", 8);
  if (header.value("endianness", std::string()) != "little") {
    throw FormatError("header must declare \"endianness\": \"little\"", 8);
  }
  if (header.value("dense_weight_layout", std::string("out_in")) != "out_in") {
    throw FormatError("unsupported dense_weight_layout, expected \"out_in\"", 8);
  }
  if (!header.contains("layers") || !header["layers"].is_array() || !header.contains("input_shape")) {
    throw FormatError("header needs \"layers\" and \"input_shape\"", 8);
  }

  std::uint64_t offset = 8 + header_len;
  auto read_tensor = [&](const json& entry, const Shape& expected, const std::string& where) {
    const Shape shape = entry.at("shape").get<Shape>();
    if (shape != expected) {
      throw FormatError(where + ": declared shape " + shape_to_string(shape) + " does not match hyperparameters " +
                            shape_to_string(expected),
                        offset);
    }
    const std::uint64_t nbytes = 4 * shape_size(shape);
    if (offset + nbytes > bytes.size()) {
      throw FormatError(where + ": payload truncated, tensor needs " + std::to_string(nbytes) + " bytes from offset " +
                            std::to_string(offset) + " but the file ends",
                        bytes.size());
    }
    std::vector<float> data(shape_size(shape));
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] = std::bit_cast<float>(get_u32_le(bytes.data() + offset + 4 * i));
    }
    Tensor t(shape, std::move(data));
    if (!t.all_finite()) throw FormatError(where + ": non-finite weights (wrong byte order?)", offset);
    offset += nbytes;
    return t;
  };

  std::vector<Layer> layers;
  try {
    const auto& jl = header["layers"];
    for (std::size_t i = 0; i < jl.size(); ++i) {
      const json& j = jl[i];
      const std::string where = "layer " + std::to_string(i);
      const auto kind = parse_kind(j.value("kind", std::string()));
      if (!kind) throw FormatError(where + ": unknown layer kind '" + j.value("kind", std::string()) + "'", 8);
      auto tensors = j.value("tensors", json::array());
      auto need_tensors = [&](std::size_t n) {
        if (tensors.size() != n) {
          throw FormatError(where + ": expected " + std::to_string(n) + " weight tensors", offset);
        }
      };
      switch (*kind) {
        case LayerKind::dense: {
          need_tensors(2);
          DenseLayer d;
          d.in_dim = get_dim(j, "in_dim", 8);
          d.out_dim = get_dim(j, "out_dim", 8);
          d.weight = read_tensor(tensors[0], {d.out_dim, d.in_dim}, where + " weight");
          d.bias = read_tensor(tensors[1], {d.out_dim}, where + " bias");
          layers.emplace_back(std::move(d));
          break;
        }
        case LayerKind::conv2d: {
          need_tensors(2);
          Conv2dLayer c;
          c.kernel_h = get_dim(j, "kernel_h", 8);
          c.kernel_w = get_dim(j, "kernel_w", 8);
          c.in_ch = get_dim(j, "in_ch", 8);
          c.out_ch = get_dim(j, "out_ch", 8);
          c.stride = get_dim(j, "stride", 8);
          c.padding = get_dim(j, "padding", 8);
          c.kernel = read_tensor(tensors[0], {c.kernel_h, c.kernel_w, c.in_ch, c.out_ch}, where + " kernel");
          c.bias = read_tensor(tensors[1], {c.out_ch}, where + " bias");
          layers.emplace_back(std::move(c));
          break;
        }
        case LayerKind::relu:
          layers.emplace_back(ReluLayer{});
          break;
        case LayerKind::maxpool2d:
          layers.emplace_back(MaxPool2dLayer{get_dim(j, "window", 8), get_dim(j, "stride", 8)});
          break;
        case LayerKind::flatten:
          layers.emplace_back(FlattenLayer{});
          break;
        case LayerKind::softmax:
          layers.emplace_back(SoftmaxLayer{});
          break;
        case LayerKind::dropout:
          layers.emplace_back(DropoutLayer{j.at("rate").get<float>()});
          break;
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed header field: ") + e.what(), 8);
  }
  if (offset != bytes.size()) {
    throw FormatError(std::to_string(bytes.size() - offset) + " trailing bytes after declared payload", offset);
  }

  Shape input_shape;
  try {
    input_shape = header["input_shape"].get<Shape>();
  } catch (const json::exception&) {
    throw FormatError("input_shape must be a list of positive integers", 8);
  }
  Network net = [&] {
    try {
      return Network(input_shape, std::move(layers));
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(std::string("inconsistent network: ") + e.what(), 8);
    }
  }();
  if (header.contains("class_count") && header["class_count"] != net.class_count()) {
    throw FormatError("declared class_count " + header["class_count"].dump() + " does not match network output " +
                          std::to_string(net.class_count()),
                      8);
  }
  return net;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_model(const Network& net, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(net));
}

Network load_model(const std::filesystem::path& path) { return deserialize_model(read_file_bytes(path)); }

}  // namespace uqf
