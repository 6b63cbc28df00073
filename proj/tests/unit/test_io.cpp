#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "uqf/dataset_io.hpp"
#include "uqf/error.hpp"
#include "uqf/fixtures.hpp"
#include "uqf/model_io.hpp"

using namespace uqf;
namespace fs = std::filesystem;

namespace {

using Bytes = std::vector<std::uint8_t>;

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("uqf-unit-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::uint32_t header_len(const Bytes& b) {
  return b[4] | (b[5] << 8) | (b[6] << 16) | (static_cast<std::uint32_t>(b[7]) << 24);
}

std::string header_text(const Bytes& b) { return std::string(b.begin() + 8, b.begin() + 8 + header_len(b)); }

// Rebuilds a model file with an edited JSON header and the original payload.
Bytes with_header(const Bytes& b, const nlohmann::json& header) {
  const std::string h = header.dump();
  Bytes out{'P', 'N', 'F', '1'};
  const auto n = static_cast<std::uint32_t>(h.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  out.insert(out.end(), h.begin(), h.end());
  out.insert(out.end(), b.begin() + 8 + header_len(b), b.end());
  return out;
}

std::uint64_t format_offset(const Bytes& b) {
  try {
    deserialize_model(b);
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("expected FormatError");
  return 0;
}

void put_be(Bytes& b, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

TEST_SUITE("model-io") {
  TEST_CASE("save/load round trip gives bit-identical predictions") {
    const auto dir = temp_dir("roundtrip");
    RngStream r(1, 5);
    for (const auto& [name, net] : fixture_models()) {
      CAPTURE(name);
      save_model(net, dir / (name + ".pnf"));
      const auto back = load_model(dir / (name + ".pnf"));
      CHECK(serialize_model(back) == serialize_model(net));
      for (int i = 0; i < 100; ++i) {
        Tensor x(net.input_shape());
        for (auto& v : x.values()) v = static_cast<float>(r.uniform());
        CHECK(max_abs_diff(forward(net, x), forward(back, x)) == 0.0f);
      }
    }
  }

  TEST_CASE("bundled fixture assets equal the built-in fixtures") {
    for (const auto& [name, net] : fixture_models()) {
      CAPTURE(name);
      const auto bytes = read_file_bytes(fs::path(UQF_ASSET_DIR) / "fixtures" / (name + ".pnf"));
      CHECK(bytes == serialize_model(net));
    }
  }

  TEST_CASE("header declares layout and byte order") {
    const auto b = serialize_model(fixture_conv());
    const auto h = nlohmann::json::parse(header_text(b));
    CHECK(h["endianness"] == "little");
    CHECK(h["dense_weight_layout"] == "out_in");
    CHECK(h["class_count"] == 3);
    CHECK(h["input_shape"] == nlohmann::json::array({6, 6, 1}));
  }

  TEST_CASE("malformed file corpus") {
    const auto good = serialize_model(fixture_mlp());
    const auto h = nlohmann::json::parse(header_text(good));

    SUBCASE("bad magic") {
      auto b = good;
      std::memcpy(b.data(), "XXXX", 4);
      CHECK(format_offset(b) == 0);
    }
    SUBCASE("payload one float short") {
      Bytes b(good.begin(), good.end() - 4);
      CHECK(format_offset(b) == b.size());
    }
    SUBCASE("trailing bytes") {
      auto b = good;
      b.push_back(0);
      CHECK(format_offset(b) == good.size());
    }
    SUBCASE("big-endian header length") {
      auto b = good;
      std::swap(b[4], b[7]);
      std::swap(b[5], b[6]);
      CHECK(format_offset(b) == 4);
    }
    SUBCASE("big-endian declared") {
      auto j = h;
      j["endianness"] = "big";
      CHECK(format_offset(with_header(good, j)) == 8);
    }
    SUBCASE("endianness missing") {
      auto j = h;
      j.erase("endianness");
      CHECK(format_offset(with_header(good, j)) == 8);
    }
    SUBCASE("shape disagrees with hyperparameters") {
      auto j = h;
      j["layers"][0]["tensors"][0]["shape"] = {4, 6};
      CHECK(format_offset(with_header(good, j)) == 8 + j.dump().size());
    }
    SUBCASE("class count mismatch") {
      auto j = h;
      j["class_count"] = 4;
      CHECK_THROWS_AS(deserialize_model(with_header(good, j)), FormatError);
    }
    SUBCASE("unknown layer kind") {
      auto j = h;
      j["layers"][1]["kind"] = "gelu";
      CHECK_THROWS_AS(deserialize_model(with_header(good, j)), FormatError);
    }
    SUBCASE("header is not JSON") {
      auto b = good;
      b[8] = '#';
      const auto off = format_offset(b);
      CHECK(off >= 8);
      CHECK(off <= 8 + header_len(good));
    }
    SUBCASE("file too short") { CHECK_THROWS_AS(deserialize_model(Bytes{'P', 'N'}), FormatError); }
  }

  TEST_CASE("missing file is an I/O error") { CHECK_THROWS_AS(load_model("/nonexistent/m.pnf"), IoError); }
}

TEST_SUITE("dataset-io") {
  TEST_CASE("hand-built IDX pair scales bytes by 1/255") {
    Bytes img, lab;
    put_be(img, 0x803);
    put_be(img, 2);
    put_be(img, 2);
    put_be(img, 2);
    for (std::uint8_t v : {0, 255, 128, 64, 1, 2, 3, 4}) img.push_back(v);
    put_be(lab, 0x801);
    put_be(lab, 2);
    lab.push_back(3);
    lab.push_back(7);
    const auto d = parse_idx(img, lab);
    CHECK(d.size() == 2);
    const auto x = d.sample(0);
    CHECK(x[0] == 0.0f);
    CHECK(x[1] == 1.0f);
    CHECK(x[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-7));
    CHECK(x[3] == doctest::Approx(64.0 / 255.0).epsilon(1e-7));
    CHECK(d.labels == std::vector<std::size_t>{3, 7});

    SUBCASE("count mismatch") {
      Bytes lab1;
      put_be(lab1, 0x801);
      put_be(lab1, 1);
      lab1.push_back(3);
      CHECK_THROWS_AS(parse_idx(img, lab1), FormatError);
    }
    SUBCASE("wrong magic") {
      auto bad = img;
      bad[3] = 0x04;
      CHECK_THROWS_AS(parse_idx(bad, lab), FormatError);
      CHECK_THROWS_AS(parse_idx(img, img), FormatError);
    }
    SUBCASE("truncated pixels") {
      Bytes cut(img.begin(), img.end() - 1);
      CHECK_THROWS_AS(parse_idx(cut, lab), FormatError);
    }
  }

  TEST_CASE("bundled digits load with the header's count") {
    for (std::string split : {"train", "test"}) {
      const auto img_path = fs::path(UQF_DATA_DIR) / ("digits-" + split + "-images.idx");
      const auto bytes = read_file_bytes(img_path);
      const std::size_t header_count = (bytes[4] << 24) | (bytes[5] << 16) | (bytes[6] << 8) | bytes[7];
      const auto d = load_idx(img_path, fs::path(UQF_DATA_DIR) / ("digits-" + split + "-labels.idx"));
      CHECK(d.size() == header_count);
      CHECK(d.sample_shape() == Shape{8, 8, 1});
      for (float v : d.images.values()) CHECK((v >= 0.0f && v <= 1.0f));
      d.validate(10);
    }
  }

  TEST_CASE("float32 IDX round-trips exactly") {
    const auto dir = temp_dir("idx");
    RngStream r(2, 2);
    std::vector<Tensor> xs;
    for (int i = 0; i < 5; ++i) {
      Tensor x({8, 8, 1});
      for (auto& v : x.values()) v = static_cast<float>(r.uniform());
      xs.push_back(x);
    }
    const auto d = LabeledDataset::from_samples(xs, {0, 1, 2, 3, 4}, "random");
    save_idx(d, dir / "i.idx", dir / "l.idx");
    const auto back = load_idx(dir / "i.idx", dir / "l.idx");
    CHECK(back.images == d.images);
    CHECK(back.labels == d.labels);
    save_idx(d, dir / "u.idx", dir / "ul.idx", IdxPixelType::ubyte);
    const auto q = load_idx(dir / "u.idx", dir / "ul.idx");
    CHECK(max_abs_diff(q.images, d.images) <= 0.5f / 255.0f + 1e-7f);
  }

  TEST_CASE("CSV toy format") {
    const auto dir = temp_dir("csv");
    {
      std::ofstream f(dir / "ok.csv");
      f << "# label, pixels\n1,0,0.5,1,0.25\n0,1,1,0,0\n";
    }
    const auto d = load_csv(dir / "ok.csv", Shape{2, 2, 1});
    CHECK(d.size() == 2);
    CHECK(d.labels == std::vector<std::size_t>{1, 0});
    CHECK(d.sample(0)[1] == 0.5f);
    CHECK(load_dataset_spec((dir / "ok.csv").string()).size() == 2);
    {
      std::ofstream f(dir / "range.csv");
      f << "1,0,1.5,1,0\n";
    }
    CHECK_THROWS_AS(load_csv(dir / "range.csv"), FormatError);
    {
      std::ofstream f(dir / "ragged.csv");
      f << "1,0,0.5,1,0.25\n0,1,1\n";
    }
    CHECK_THROWS_AS(load_csv(dir / "ragged.csv"), FormatError);
    CHECK_THROWS_AS(load_dataset_spec("data.bin"), ConfigError);
  }
}
