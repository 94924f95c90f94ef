#include "helpers.hpp"

#include <brw/rng.hpp>

using namespace brw;

// published known-answer vectors for philox4x32-10
TEST_CASE("philox known answers", "[rng]") {
    auto zero = detail::philox4x32_10({0, 0, 0, 0}, {0, 0});
    CHECK(zero[0] == 0x6627e8d5u);
    CHECK(zero[1] == 0xe169c58du);
    CHECK(zero[2] == 0xbc57ac4cu);
    CHECK(zero[3] == 0x9b00dbd8u);

    auto ones = detail::philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      {0xffffffffu, 0xffffffffu});
    CHECK(ones[0] == 0x408f276du);
    CHECK(ones[1] == 0x41c83b0eu);
    CHECK(ones[2] == 0xa20bc7c6u);
    CHECK(ones[3] == 0x6d5451fdu);
}

TEST_CASE("streams are deterministic and distinct", "[rng]") {
    RngStream a(42, 0), b(42, 0), c(42, 1), d(43, 0);
    bool same = true, diff_stream = false, diff_seed = false;
    for (int i = 0; i < 100; ++i) {
        uint64_t xa = a.next_u64(), xb = b.next_u64();
        if (xa != xb) same = false;
        if (xa != c.next_u64()) diff_stream = true;
        if (xa != d.next_u64()) diff_seed = true;
    }
    CHECK(same);
    CHECK(diff_stream);
    CHECK(diff_seed);
}

TEST_CASE("u01 range and moments", "[rng]") {
    RngStream rng(7, 3);
    double sum = 0.0, sq = 0.0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
        double u = rng.u01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sq += u * u;
    }
    double mean = sum / N;
    double var = sq / N - mean * mean;
    CHECK(std::abs(mean - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / N));
    CHECK(std::abs(var - 1.0 / 12.0) < 0.002);
}

TEST_CASE("normal and exponential moments", "[rng]") {
    RngStream rng(11, 5);
    const int N = 200000;
    double nsum = 0.0, nsq = 0.0, esum = 0.0;
    for (int i = 0; i < N; ++i) {
        double z = rng.normal();
        nsum += z;
        nsq += z * z;
        esum += rng.exponential(2.0);
    }
    CHECK(std::abs(nsum / N) < 3.0 / std::sqrt(double(N)));
    CHECK(std::abs(nsq / N - 1.0) < 0.02);
    CHECK(std::abs(esum / N - 0.5) < 3.0 * 0.5 / std::sqrt(double(N)));
}
