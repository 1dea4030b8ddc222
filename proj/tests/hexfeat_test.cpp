#include "malfuse/hexfeat.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "malfuse/errors.hpp"

using namespace malfuse;

TEST_CASE("byte_metadata exposes file size and start address") {
  std::istringstream in("00401000 4D 5A\n");
  HexDump dump = parse_hex_dump(in);
  const FeatureBlock block = byte_metadata(dump);
  CHECK(block.category == "BYTE_MD");
  REQUIRE(block.dim() == 2);
  CHECK(block.names[0] == "file_size");
  CHECK(block.names[1] == "start_address");
  CHECK(block.values[0] == doctest::Approx(15.0));  // stream length
  CHECK(block.values[1] == doctest::Approx(0x401000));
}

TEST_CASE("byte_unigrams counts defined bytes only") {
  std::istringstream in("0000 00 00 FF ?? 7F ??\n");
  const FeatureBlock block = byte_unigrams(parse_hex_dump(in));
  CHECK(block.category == "BYTE_1G");
  REQUIRE(block.dim() == 256);
  CHECK(block.names[0] == "byte_00");
  CHECK(block.names[255] == "byte_ff");
  CHECK(block.values[0x00] == 2.0);
  CHECK(block.values[0xFF] == 1.0);
  CHECK(block.values[0x7F] == 1.0);
  CHECK(std::accumulate(block.values.begin(), block.values.end(), 0.0) == 4.0);
}

TEST_CASE("shannon_entropy matches hand-computed values") {
  // Two bits of entropy: four symbols, equally likely.
  const std::uint8_t a[] = {0, 0, 1, 1, 2, 2, 3, 3};
  CHECK(shannon_entropy(a, 8) == doctest::Approx(2.0).epsilon(1e-12));
  // Constant chunk: zero entropy.
  const std::uint8_t b[] = {5, 5, 5, 5};
  CHECK(shannon_entropy(b, 4) == doctest::Approx(0.0));
  // Mixed distribution 1/6, 2/6, 3/6.
  const std::uint8_t c[] = {0, 1, 1, 2, 2, 2};
  CHECK(shannon_entropy(c, 6) ==
        doctest::Approx(1.4591479170272448).epsilon(1e-12));
}

TEST_CASE("shannon_entropy of a full-range chunk is exactly 8 bits") {
  std::vector<std::uint8_t> chunk(256);
  std::iota(chunk.begin(), chunk.end(), 0);
  CHECK(shannon_entropy(chunk.data(), chunk.size()) == 8.0);  // exact
}

TEST_CASE("entropy_stream chunks defined bytes") {
  // 6 defined bytes with chunk_size 4: one full chunk + final pair.
  std::vector<std::uint8_t> bytes = {0, 0, 1, 1, 7, 7};
  const auto stream = entropy_stream(bytes, {.chunk_size = 4});
  REQUIRE(stream.size() == 2);
  CHECK(stream[0] == doctest::Approx(1.0));
  CHECK(stream[1] == doctest::Approx(0.0));

  // A trailing single byte is dropped.
  bytes = {0, 0, 1, 1, 9};
  CHECK(entropy_stream(bytes, {.chunk_size = 4}).size() == 1);

  // Fewer than 2 bytes: empty stream.
  CHECK(entropy_stream(std::vector<std::uint8_t>{42}, {.chunk_size = 4}).empty());
  CHECK(entropy_stream(std::vector<std::uint8_t>{}, {.chunk_size = 4}).empty());

  CHECK_THROWS_AS(entropy_stream(bytes, {.chunk_size = 1}), ValidationError);
}

TEST_CASE("entropy_stream skips undefined bytes before chunking") {
  std::istringstream in(
      "0000 00 ?? 00 ?? 01 ??\n"
      "0006 01 ?? 07 07\n");
  const auto stream = entropy_stream(parse_hex_dump(in), {.chunk_size = 4});
  REQUIRE(stream.size() == 2);
  CHECK(stream[0] == doctest::Approx(1.0));  // 00 00 01 01
  CHECK(stream[1] == doctest::Approx(0.0));  // 07 07
}

TEST_CASE("entropy_stats matches a frozen reference") {
  // Reference values computed independently for this stream.
  const std::vector<double> stream = {7.5, 0.5, 3.25, 3.25, 6.0};
  const FeatureBlock block = entropy_stats(stream);
  CHECK(block.category == "BYTE_ENT");
  REQUIRE(block.dim() == 14);

  const double tol = 1e-12;
  CHECK(block.values[0] == doctest::Approx(4.1).epsilon(tol));    // mean
  CHECK(block.values[1] == doctest::Approx(5.915).epsilon(tol));  // variance
  CHECK(block.values[2] == doctest::Approx(3.25).epsilon(tol));   // median
  CHECK(block.values[3] == doctest::Approx(7.5).epsilon(tol));    // max
  CHECK(block.values[4] == doctest::Approx(0.5).epsilon(tol));    // min
  const double expected_pcts[9] = {1.6, 2.7,  3.25, 3.25, 3.25,
                                   4.35, 5.45, 6.3,  6.9};
  for (int i = 0; i < 9; ++i) {
    CHECK(block.values[5 + i] ==
          doctest::Approx(expected_pcts[i]).epsilon(1e-9));
  }
}

TEST_CASE("entropy_stats on an empty stream is all zeros") {
  const FeatureBlock block = entropy_stats({});
  REQUIRE(block.dim() == 14);
  for (double v : block.values) CHECK(v == 0.0);
}

TEST_CASE("entropy values stay within [0, 8]") {
  std::vector<std::uint8_t> bytes(4096);
  std::uint32_t state = 0x12345u;
  for (auto& b : bytes) {
    state = state * 1664525u + 1013904223u;
    b = static_cast<std::uint8_t>(state >> 24);
  }
  for (double h : entropy_stream(bytes, {.chunk_size = 256})) {
    CHECK(h >= 0.0);
    CHECK(h <= 8.0);
  }
}
