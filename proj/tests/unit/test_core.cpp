#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "../support/generators.hpp"
#include "doctest.h"
#include "fitgate/core/error.hpp"
#include "fitgate/core/image.hpp"
#include "fitgate/core/parallel.hpp"
#include "fitgate/core/random.hpp"
#include "fitgate/core/scaler.hpp"
#include "fitgate/core/stats.hpp"
#include "fitgate/core/text.hpp"

using namespace fitgate;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an fitgate::Error");
  return ErrorCode::kInvalidArgument;
}

std::vector<unsigned char> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

// Independent SplitMix64 written from the published constants.
std::uint64_t splitmix_ref(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

TEST_CASE("splitmix64 first output for seed 0") {
  RandomStream rng(0);
  CHECK(rng.next_u64() == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("splitmix64 matches reference for arbitrary seeds") {
  RandomStream seeds(123);
  for (int t = 0; t < 50; ++t) {
    std::uint64_t s = seeds.next_u64();
    RandomStream rng(s);
    for (int i = 0; i < 20; ++i) CHECK(rng.next_u64() == splitmix_ref(s));
  }
}

TEST_CASE("rng_next is pure and matches the stateful stream") {
  RandomStream a(77);
  const auto [v, next] = rng_next(a);
  CHECK(a.state() == 77);
  RandomStream b(77);
  CHECK(b.next_u64() == v);
  CHECK(b == next);
}

TEST_CASE("derive_stream seeds from the first output of seed + index") {
  for (std::uint64_t i = 0; i < 10; ++i) {
    std::uint64_t s = 42 + i;
    const std::uint64_t first = splitmix_ref(s);
    CHECK(derive_stream(42, i).state() == first);
  }
  CHECK(derive_stream(1, 0) != derive_stream(1, 1));
}

TEST_CASE("uniform draws stay in [0,1) with mean near one half") {
  RandomStream rng(9);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / 100000 - 0.5) < 0.01);
}

namespace {
std::uint64_t unshift(std::uint64_t y, int k) {
  std::uint64_t x = y;
  for (int i = 0; i < 64 / k + 1; ++i) x = y ^ (x >> k);
  return x;
}
std::uint64_t mul_inverse(std::uint64_t a) {
  std::uint64_t x = a;  // Newton iteration doubles the correct low bits
  for (int i = 0; i < 6; ++i) x *= 2 - a * x;
  return x;
}
// State whose next SplitMix64 output equals `value`.
std::uint64_t state_for_output(std::uint64_t value) {
  std::uint64_t z = unshift(value, 31);
  z *= mul_inverse(0x94D049BB133111EBULL);
  z = unshift(z, 27);
  z *= mul_inverse(0xBF58476D1CE4E5B9ULL);
  z = unshift(z, 30);
  return z - 0x9E3779B97F4A7C15ULL;
}
}  // namespace

TEST_CASE("uniform stays below 1 for the largest raw outputs") {
  for (std::uint64_t v : {~0ULL, ~0ULL - 1, ~0ULL - 1000}) {
    RandomStream probe(state_for_output(v));
    CHECK(RandomStream(state_for_output(v)).next_u64() == v);
    CHECK(probe.uniform() < 1.0);
  }
}

TEST_CASE("normal draws have unit moments") {
  RandomStream rng(10);
  double sum = 0, sq = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.03);
}

TEST_CASE("below stays in range and shuffled_indices is a permutation") {
  RandomStream rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::uint64_t n = 1 + rng.below(50);
    CHECK(rng.below(n) < n);
    auto order = shuffled_indices(static_cast<std::size_t>(n), rng);
    std::sort(order.begin(), order.end());
    for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == i);
  }
}

TEST_CASE("image rejects out-of-range intensities; clamped repairs them") {
  CHECK(code_of([] { Image(2, 1, std::vector<double>{0.5, 1.5}); }) == ErrorCode::kDomain);
  CHECK(code_of([] { Image(2, 1, std::vector<double>{0.5, std::nan("")}); }) == ErrorCode::kDomain);
  CHECK(code_of([] { Grid(2, 2, std::vector<double>{1, 2, 3}); }) == ErrorCode::kDimensionMismatch);
  const Image c = Image::clamped(Grid(3, 1, std::vector<double>{-1.0, 0.25, 7.0}));
  CHECK(c(0, 0) == 0.0);
  CHECK(c(1, 0) == 0.25);
  CHECK(c(2, 0) == 1.0);
}

TEST_CASE("PGM round trip quantizes to the nearest 1/255 step") {
  RandomStream rng(3);
  for (int t = 0; t < 20; ++t) {
    const int w = testing::random_int(rng, 1, 40), h = testing::random_int(rng, 1, 40);
    const Image img = testing::random_image(rng, w, h);
    const Image back = decode_pgm(encode_pgm(img));
    REQUIRE(back.width() == w);
    REQUIRE(back.height() == h);
    for (std::size_t i = 0; i < img.size(); ++i) {
      CHECK(std::abs(back.values()[i] - img.values()[i]) <= 0.5 / 255 + 1e-12);
    }
    // Quantized images are fixed points.
    CHECK(decode_pgm(encode_pgm(back)) == back);
  }
}

TEST_CASE("PGM decoder reports precise errors") {
  CHECK(code_of([] { decode_pgm(bytes_of("P2\n2 2\n255\n....")); }) == ErrorCode::kPgmMagic);
  CHECK(code_of([] { decode_pgm(bytes_of("")); }) == ErrorCode::kPgmMagic);
  CHECK(code_of([] { decode_pgm(bytes_of("P5\n2 2\n65535\n....")); }) == ErrorCode::kPgmMaxval);
  CHECK(code_of([] { decode_pgm(bytes_of("P5\n2 2\n255\n...")); }) == ErrorCode::kPgmPayloadSize);
  CHECK(code_of([] { decode_pgm(bytes_of("P5\n2\n")); }) == ErrorCode::kPgmHeader);
  CHECK(code_of([] { decode_pgm(bytes_of("P5\n0 2\n255\n")); }) == ErrorCode::kPgmHeader);
  // Comments in the header are allowed.
  const Image ok = decode_pgm(bytes_of(std::string("P5\n# hi\n2 1\n255\n\xff\x00", 18)));
  CHECK(ok(0, 0) == 1.0);
  CHECK(ok(1, 0) == 0.0);
}

TEST_CASE("image file round trip and missing files") {
  const auto dir = std::filesystem::temp_directory_path() / "fitgate_core_test";
  std::filesystem::create_directories(dir);
  const Image img = Image::filled(5, 4, 0.2);
  save_image(img, dir / "a.pgm");
  CHECK(load_image(dir / "a.pgm") == decode_pgm(encode_pgm(img)));
  CHECK(code_of([&] { load_image(dir / "missing.pgm"); }) == ErrorCode::kIo);
  std::filesystem::remove_all(dir);
}

TEST_CASE("reflect_index mirrors without repeating the edge") {
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(-2, 5) == 2);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(6, 5) == 2);
  CHECK(reflect_index(0, 1) == 0);
  CHECK(reflect_index(3, 1) == 0);
  // Oracle: unfold the periodic mirror of period 2(n-1).
  for (int n = 2; n < 9; ++n) {
    for (int i = -20; i < 30; ++i) {
      const int period = 2 * (n - 1);
      int m = ((i % period) + period) % period;
      if (m >= n) m = period - m;
      CHECK(reflect_index(i, n) == m);
    }
  }
}

TEST_CASE("summary statistics") {
  const std::vector<double> odd{3, 1, 2};
  const Stats s = summarize(odd);
  CHECK(s.median == 2.0);
  CHECK(s.mean == 2.0);
  CHECK(s.std == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s.count == 3);
  const std::vector<double> even{4, 1, 3, 2};
  CHECK(summarize(even).median == 2.5);
  CHECK(code_of([] { summarize(std::vector<double>{}); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("percentile interpolates linearly between order statistics") {
  const std::vector<double> v{10, 20, 30, 40, 50};
  CHECK(percentile(v, 0) == 10);
  CHECK(percentile(v, 100) == 50);
  CHECK(percentile(v, 50) == 30);
  CHECK(percentile(v, 5) == doctest::Approx(12.0));
  CHECK(percentile(v, 62.5) == doctest::Approx(35.0));
  CHECK(code_of([&] { percentile(v, 101); }) == ErrorCode::kDomain);
}

TEST_CASE("Stats json round trip") {
  const Stats s{1.5, 2.0, 0.25, 7};
  const Stats back = nlohmann::json(s).get<Stats>();
  CHECK(back.median == s.median);
  CHECK(back.mean == s.mean);
  CHECK(back.std == s.std);
  CHECK(back.count == s.count);
}

TEST_CASE("format_double round-trips every value exactly") {
  RandomStream rng(8);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), testing::random_int(rng, -60, 60));
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("parse_double reads back every formatted value, subnormals included") {
  RandomStream rng(9);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), testing::random_int(rng, -1070, 1020));
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(parse_double("3.662939443e-315") > 0.0);
  CHECK(parse_double(format_double(std::numeric_limits<double>::denorm_min())) == std::numeric_limits<double>::denorm_min());
  for (const char* bad : {"", "abc", "1.5x", " 2", "1e999"}) CHECK_THROWS_AS(parse_double(bad), Error);
}

TEST_CASE("csv reader") {
  const auto path = std::filesystem::temp_directory_path() / "fitgate_csv_test.csv";
  write_text_file(path, "a,b,c\n1,,3\r\n\nx,y,z\n");
  const auto t = read_csv(path);
  CHECK(t.rows.size() == 2);
  CHECK(t.rows[0][1].empty());
  CHECK(t.column("c") == 2);
  CHECK(code_of([&] { t.column("d"); }) == ErrorCode::kFormat);
  write_text_file(path, "a,b\n1\n");
  CHECK(code_of([&] { read_csv(path); }) == ErrorCode::kFormat);
  std::filesystem::remove(path);
}

TEST_CASE("scaler standardizes training rows") {
  RandomStream rng(4);
  const std::size_t dims = 3, n = 200;
  std::vector<double> rows(n * dims);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i * dims] = rng.normal(5, 2);
    rows[i * dims + 1] = rng.normal(-1, 0.5);
    rows[i * dims + 2] = 7.0;  // constant column hits the std floor
  }
  const Scaler s = Scaler::fit(rows, dims);
  CHECK(s.std[2] == 1e-8);
  s.apply(rows);
  for (std::size_t d = 0; d < 2; ++d) {
    double m = 0, q = 0;
    for (std::size_t i = 0; i < n; ++i) m += rows[i * dims + d];
    m /= n;
    for (std::size_t i = 0; i < n; ++i) q += (rows[i * dims + d] - m) * (rows[i * dims + d] - m);
    CHECK(std::abs(m) < 1e-12);
    CHECK(q / n == doctest::Approx(1.0));
  }
  CHECK(rows[2] == 0.0);
}

TEST_CASE("parallel_for visits every index once and rethrows the lowest failure") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 1000);
  try {
    parallel_for(100, [](std::size_t i) {
      if (i == 17 || i == 60) throw Error(ErrorCode::kDomain, std::to_string(i));
    });
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "17");
  }
}

TEST_CASE("error codes have names") {
  CHECK(error_code_name(ErrorCode::kPgmMagic) == "pgm_magic");
  CHECK(error_code_name(ErrorCode::kMissingPrerequisite) == "missing_prerequisite");
}
