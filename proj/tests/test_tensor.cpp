#include <doctest.h>

#include <algorithm>

#include "ectn/error.hpp"
#include "ectn/tensor.hpp"
#include "oracles.hpp"

using namespace ectn;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected ectn::Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("empty tensor has empty slices") {
  const auto t = ObservedTensor::build({2, 2, 2}, {});
  CHECK(t.size() == 0);
  CHECK(t.density() == 0.0);
  for (Mode mode : {Mode::User, Mode::Service, Mode::Time})
    for (Index x = 0; x < 2; ++x) CHECK(t.slice(mode, x).empty());
}

TEST_CASE("two entries land in their user buckets") {
  const auto t = ObservedTensor::build({2, 2, 2}, {{0, 0, 0, 1.0}, {1, 1, 1, 2.0}});
  CHECK(t.size() == 2);
  REQUIRE(t.slice(Mode::User, 0).size() == 1);
  CHECK(t.slice(Mode::User, 0)[0] == 0);
  REQUIRE(t.slice(Mode::User, 1).size() == 1);
  CHECK(t.slice(Mode::User, 1)[0] == 1);
}

TEST_CASE("slice examples") {
  const auto t = ObservedTensor::build({2, 2, 2}, {{0, 0, 0, 1.0}, {0, 1, 1, 3.0}});
  const auto s0 = t.slice(Mode::User, 0);
  CHECK(std::vector<std::size_t>(s0.begin(), s0.end()) == std::vector<std::size_t>{0, 1});
  CHECK(t.slice(Mode::User, 1).empty());
  CHECK(code_of([&] { (void)t.slice(Mode::Time, 2); }) == ErrorCode::IndexOutOfRange);
  CHECK(code_of([&] { (void)t.slice(Mode::Service, -1); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("density") {
  std::vector<Entry> full;
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j)
      for (Index k = 0; k < 2; ++k) full.push_back({i, j, k, 1.0});
  CHECK(ObservedTensor::build({2, 2, 2}, full).density() == 1.0);

  // 408919 / (142 * 4500 * 64) written out by hand
  const Dims big{142, 4500, 64};
  CHECK(big.volume() == 40896000.0);
  CHECK(408919.0 / big.volume() == doctest::Approx(0.0100).epsilon(0.001));
}

TEST_CASE("build rejects invalid input") {
  CHECK(code_of([] { ObservedTensor::build({2, 2, 2}, {{2, 0, 0, 1.0}}); }) == ErrorCode::IndexOutOfRange);
  CHECK(code_of([] { ObservedTensor::build({2, 2, 2}, {{0, 0, -1, 1.0}}); }) == ErrorCode::IndexOutOfRange);
  CHECK(code_of([] { ObservedTensor::build({2, 2, 2}, {{0, 0, 0, -0.5}}); }) == ErrorCode::NegativeValue);
  CHECK(code_of([] { ObservedTensor::build({2, 2, 2}, {{0, 0, 0, std::nan("")}}); }) == ErrorCode::NegativeValue);
  CHECK(code_of([] { ObservedTensor::build({2, 2, 2}, {{1, 0, 1, 1.0}, {1, 0, 1, 2.0}}); }) ==
        ErrorCode::DuplicateCoordinate);
  CHECK(code_of([] { ObservedTensor::build({0, 2, 2}, {}); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("mode indexes match a brute-force scan") {
  struct Case {
    Dims dims;
    std::size_t count;
  };
  for (const Case c : {Case{{3, 4, 2}, 10}, Case{{5, 5, 5}, 50}, Case{{7, 3, 6}, 100}}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto t = ObservedTensor::build(c.dims, oracle::random_entries(c.dims, c.count, seed));
      for (Mode mode : {Mode::User, Mode::Service, Mode::Time}) {
        std::vector<int> visits(t.size(), 0);
        std::size_t total = 0;
        for (Index x = 0; x < c.dims[mode]; ++x) {
          std::vector<std::size_t> expected;
          for (std::size_t p = 0; p < t.size(); ++p)
            if (t[p].coord(mode) == x) expected.push_back(p);
          const auto got = t.slice(mode, x);
          CHECK(std::vector<std::size_t>(got.begin(), got.end()) == expected);
          for (std::size_t p : got) ++visits[p];
          total += got.size();
        }
        CHECK(total == t.size());
        CHECK(std::all_of(visits.begin(), visits.end(), [](int v) { return v == 1; }));
      }
    }
  }
}
