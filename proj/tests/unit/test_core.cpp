#include <doctest.h>

#include <cmath>
#include <set>

#include "uqf/error.hpp"
#include "uqf/kernels.hpp"
#include "uqf/rng.hpp"
#include "uqf/tensor.hpp"

using namespace uqf;

TEST_SUITE("tensor") {
  TEST_CASE("shape and data length must agree") {
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
    Tensor t({2, 3}, 1.5f);
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK(t.all_finite());
    t[4] = NAN;
    CHECK_FALSE(t.all_finite());
  }

  TEST_CASE("reshape keeps data, rejects wrong sizes") {
    Tensor t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    const auto r = t.reshaped({3, 2});
    CHECK(r.shape() == Shape{3, 2});
    CHECK(r[5] == 6.0f);
    CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
  }

  TEST_CASE("argmax breaks ties toward the lowest index") {
    CHECK(argmax(std::vector<float>{0.1f, 0.8f, 0.1f}) == 1);
    CHECK(argmax(std::vector<float>{0.5f, 0.5f}) == 0);
    CHECK(argmax(std::vector<float>{0.2f, 0.4f, 0.4f}) == 1);
  }

  TEST_CASE("distances") {
    Tensor a({3}, std::vector<float>{0.0f, 0.5f, 1.0f});
    Tensor b({3}, std::vector<float>{0.25f, 0.5f, 0.5f});
    CHECK(linf_distance(a, b) == 0.5f);
    CHECK(max_abs_diff(a, a) == 0.0f);
    CHECK_THROWS_AS(linf_distance(a, Tensor({2})), ShapeError);
  }
}

TEST_SUITE("rng") {
  TEST_CASE("same key, same sequence; different keys differ") {
    RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a.next_u64();
      CHECK(x == b.next_u64());
      differs_c |= x != c.next_u64();
      differs_d |= x != d.next_u64();
    }
    CHECK(differs_c);
    CHECK(differs_d);
  }

  TEST_CASE("cross-platform sequence is pinned") {
    // mt19937_64 output is fixed by the standard; the seeding path is ours.
    RngStream r(1, 0);
    const auto first = r.next_u64();
    RngStream again(1, 0);
    CHECK(again.next_u64() == first);
    std::seed_seq seq{1u, 0u, 0u, 0u};
    std::mt19937_64 ref(seq);
    CHECK(ref() == first);
  }

  TEST_CASE("uniform, index and normal ranges and moments") {
    RngStream r(3, 1);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    std::vector<int> counts(7, 0);
    for (int i = 0; i < n; ++i) {
      const double u = r.uniform();
      CHECK((u >= 0.0 && u < 1.0));
      ++counts[r.uniform_index(7)];
      const double z = r.normal();
      s += z;
      s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
    for (int c : counts) CHECK(std::abs(c - n / 7.0) < 5.0 * std::sqrt(n / 7.0));
  }

  TEST_CASE("derived stream ids are distinct for nearby keys") {
    std::set<std::uint64_t> ids;
    for (std::uint64_t a = 0; a < 4; ++a)
      for (std::uint64_t b = 0; b < 50; ++b)
        for (std::uint64_t c = 0; c < 50; ++c) ids.insert(derive_stream_id(a, b, c));
    CHECK(ids.size() == 4 * 50 * 50);
  }
}

TEST_SUITE("kernels") {
  using namespace uqf::kernels;

  std::vector<float> random_vec(RngStream& r, std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(r.uniform(-1.0, 1.0));
    return v;
  }

  TEST_CASE("every available backend matches the scalar reference") {
    RngStream r(11, 0);
    const auto& ref = scalar_table();
    for (Backend b : available_backends()) {
      CAPTURE(backend_name(b));
      const auto& t = table_for(b);
      for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 15u, 16u, 17u, 33u, 64u, 127u, 1000u}) {
        CAPTURE(n);
        const auto a = random_vec(r, n), c = random_vec(r, n);
        double exact = 0.0, mag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          exact += static_cast<double>(a[i]) * c[i];
          mag += std::abs(static_cast<double>(a[i]) * c[i]);
        }
        // Reassociation bound for float sums: n * eps * sum |a_i b_i|.
        const double bound = (n + 1) * 1.2e-7 * mag + 1e-30;
        CHECK(std::abs(t.dot(a.data(), c.data(), n) - exact) <= bound);
        CHECK(std::abs(ref.dot(a.data(), c.data(), n) - exact) <= bound);

        auto y1 = random_vec(r, n);
        auto y2 = y1;
        ref.axpy(0.37f, a.data(), y1.data(), n);
        t.axpy(0.37f, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-6f * (1.0f + std::abs(y1[i])));
      }
      for (std::size_t rows : {1u, 3u, 4u, 5u, 10u, 64u}) {
        for (std::size_t cols : {1u, 8u, 9u, 36u, 128u}) {
          const auto w = random_vec(r, rows * cols), x = random_vec(r, cols), bias = random_vec(r, rows);
          std::vector<float> y1(rows), y2(rows);
          ref.matvec(w.data(), x.data(), bias.data(), y1.data(), rows, cols);
          t.matvec(w.data(), x.data(), bias.data(), y2.data(), rows, cols);
          for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-5f * (1.0f + std::abs(y1[i])));
          t.matvec(w.data(), x.data(), nullptr, y2.data(), rows, cols);
          for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(y1[i] - bias[i] - y2[i]) <= 1e-5f * (1.0f + std::abs(y1[i])));
        }
      }
    }
  }

  TEST_CASE("backend selection") {
    const Backend before = active_backend();
    CHECK(backend_available(Backend::scalar));
    set_backend(Backend::scalar);
    CHECK(active_backend() == Backend::scalar);
    CHECK(parse_backend("auto") == detect_backend());
    CHECK_FALSE(parse_backend("sse9").has_value());
    for (Backend b : {Backend::avx2, Backend::neon}) {
      if (!backend_available(b)) CHECK_THROWS_AS(set_backend(b), ConfigError);
    }
    set_backend(before);
  }
}
