#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "curlflow/rng.hpp"

using namespace curlflow;

TEST_CASE("streams are reproducible and distinct") {
    RngStream a(42, 7), b(42, 7), c(42, 8);
    bool same = true, diff = false;
    for (int i = 0; i < 64; ++i) {
        const uint32_t x = a.next_u32();
        if (x != b.next_u32()) same = false;
        if (x != c.next_u32()) diff = true;
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("uniform moments") {
    RngStream rng(1, 0);
    const int N = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
        const double u = rng.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        s += u;
        s2 += u * u;
    }
    s /= N;
    s2 /= N;
    CHECK(std::abs(s - 0.5) < 0.005);
    CHECK(std::abs(s2 - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal moments") {
    RngStream rng(1, 1);
    const int N = 200000;
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < N; ++i) {
        const double z = rng.normal();
        m1 += z;
        m2 += z * z;
        m4 += z * z * z * z;
    }
    m1 /= N;
    m2 /= N;
    m4 /= N;
    CHECK(std::abs(m1) < 0.01);
    CHECK(std::abs(m2 - 1.0) < 0.02);
    CHECK(std::abs(m4 - 3.0) < 0.1);
}

TEST_CASE("cross-stream correlation is noise-level") {
    const int N = 100000;
    RngStream a(9, 1), b(9, 2);
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += a.normal() * b.normal();
    CHECK(std::abs(s / N) < 4.0 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("substream mixing separates adjacent ids") {
    CHECK(substream(1, 2, 3) != substream(1, 2, 4));
    CHECK(substream(1, 2, 3) != substream(1, 3, 3));
    CHECK(substream(0, 0, 0) != substream(0, 0, 1));
}
