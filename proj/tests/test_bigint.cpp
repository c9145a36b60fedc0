#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ectl/bigint.hpp"
#include "ectl/rng.hpp"

using ectl::BigInt;

TEST_CASE("construction and int64 round trip") {
  for (std::int64_t v : {std::int64_t{0}, std::int64_t{1}, std::int64_t{-1},
                         std::int64_t{123456789}, INT64_MAX, INT64_MIN + 1}) {
    CHECK(BigInt(v).to_int64() == v);
  }
  CHECK(BigInt(0).is_zero());
}

TEST_CASE("add/sub/mul agree with __int128 on random values") {
  ectl::CounterRng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t a = static_cast<std::int64_t>(rng.next_u64() >> 20) -
                           (1ll << 43);
    const std::int64_t b = static_cast<std::int64_t>(rng.next_u64() >> 20) -
                           (1ll << 43);
    const std::int64_t k = static_cast<std::int64_t>(rng.next_u64() >> 48) -
                           (1ll << 15);
    CHECK((BigInt(a) + BigInt(b)).to_int64() == a + b);
    CHECK((BigInt(a) - BigInt(b)).to_int64() == a - b);
    const __int128 prod = static_cast<__int128>(a) * k;
    const BigInt pb = BigInt(a) * k;
    CHECK(pb.to_double() == doctest::Approx(static_cast<double>(prod)));
  }
}

TEST_CASE("multi-limb accumulation stays exact") {
  BigInt acc(1);
  for (int i = 0; i < 10; ++i) acc = acc * 1000000007ll;
  // 1000000007^10 has about 300 bits
  CHECK(acc.bit_length() > 290);
  BigInt back = acc;
  for (int i = 0; i < 10; ++i) {
    // divide is not provided; check via reconstruction instead
  }
  CHECK(acc - acc == BigInt(0));
  CHECK((acc + acc) - acc == acc);
}

TEST_CASE("shl and round_shr") {
  CHECK(BigInt(3).shl(4).to_int64() == 48);
  CHECK(BigInt(-3).shl(4).to_int64() == -48);
  // ties away from zero
  CHECK(BigInt(5).round_shr(1).to_int64() == 3);    // 2.5 -> 3
  CHECK(BigInt(-5).round_shr(1).to_int64() == -3);  // -2.5 -> -3
  CHECK(BigInt(7).round_shr(2).to_int64() == 2);    // 1.75 -> 2
  CHECK(BigInt(-7).round_shr(2).to_int64() == -2);
  ectl::CounterRng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t v = static_cast<std::int64_t>(rng.next_u64() >> 16) -
                           (1ll << 47);
    const int k = 1 + static_cast<int>(rng.next_u64() % 20);
    CHECK(BigInt(v).round_shr(k).to_int64() == ectl::round_shift(v, k));
    CHECK(BigInt(v).shl(k).round_shr(k).to_int64() == v);
  }
}

TEST_CASE("mod_pow2 matches masking semantics") {
  ectl::CounterRng rng(13);
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t v = static_cast<std::int64_t>(rng.next_u64() >> 16) -
                           (1ll << 47);
    const int k = 8 + static_cast<int>(rng.next_u64() % 40);
    const std::uint64_t q = std::uint64_t{1} << k;
    const std::int64_t expect =
        static_cast<std::int64_t>(static_cast<std::uint64_t>(v) & (q - 1));
    CHECK(BigInt(v).mod_pow2(k).to_int64() == expect);
  }
}

TEST_CASE("comparisons") {
  CHECK(BigInt(-5) < BigInt(3));
  CHECK(BigInt(3) < BigInt(5));
  CHECK(BigInt(-5) < BigInt(-3));
  CHECK(BigInt(2).shl(100) < BigInt(3).shl(100));
  CHECK_FALSE(BigInt(3).shl(100) < BigInt(3).shl(100));
}
