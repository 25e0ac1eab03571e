#include "chunknet/lb.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"

using namespace chunknet;

TEST_CASE("rtt score moves one eighth of the way per sample") {
    PathScoreboard b(2, 10'000);
    CHECK(b.rtt_score(0) == doctest::Approx(10'000));
    b.record_rtt(0, 18'000);
    CHECK(b.rtt_score(0) == doctest::Approx(11'000));
    b.record_rtt(0, 18'000);
    CHECK(b.rtt_score(0) == doctest::Approx(11'875));
    CHECK(b.rtt_score(1) == doctest::Approx(10'000));  // untouched path keeps prior

    for (int i = 0; i < 200; ++i) b.record_rtt(0, 18'000);
    CHECK(std::abs(b.rtt_score(0) - 18'000) < 1.0);
}

TEST_CASE("ecn fraction tracks the mark rate") {
    PathScoreboard b(1, 10'000);
    CHECK(b.ecn_score(0) == doctest::Approx(0.0));
    for (int i = 0; i < 8; ++i) b.record_ecn(0, true);
    CHECK(b.ecn_score(0) == doctest::Approx(1.0 - std::pow(0.875, 8)));
    for (int i = 0; i < 400; ++i) b.record_ecn(0, true);
    CHECK(b.ecn_score(0) == doctest::Approx(1.0).epsilon(1e-6));
    for (int i = 0; i < 400; ++i) b.record_ecn(0, false);
    CHECK(b.ecn_score(0) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("two-choice selection frequencies match the pair distribution") {
    // Distinct scores 10 < 20 < 30 < 40 us: the winner of each unordered
    // pair is the smaller index, so expected pick rates are 3/6, 2/6, 1/6, 0.
    PathScoreboard b(4, 10'000);
    for (int p = 0; p < 4; ++p)
        for (int i = 0; i < 400; ++i) b.record_rtt(p, 10'000 + p * 10'000);

    RngStream rng(1, "lbtest");
    const int n = 100'000;
    std::vector<int> hits(4, 0);
    for (int i = 0; i < n; ++i) hits[select_path(LbPolicy::p2_rtt, b, rng)]++;

    double want[4] = {0.5, 1.0 / 3.0, 1.0 / 6.0, 0.0};
    for (int p = 0; p < 4; ++p) {
        double freq = double(hits[p]) / n;
        double sd = std::sqrt(want[p] * (1 - want[p]) / n);
        CAPTURE(p);
        CHECK(std::abs(freq - want[p]) <= 3 * sd + 1e-12);
    }
    CHECK(hits[3] == 0);
}

TEST_CASE("equal scores fall back to the lower path id") {
    PathScoreboard b(4, 10'000);  // all paths at the prior
    RngStream rng(2, "lbtie");
    const int n = 60'000;
    std::vector<int> hits(4, 0);
    for (int i = 0; i < n; ++i) hits[select_path(LbPolicy::p2_rtt, b, rng)]++;
    // Same pair math as above: the lower id of each pair always wins.
    double want[4] = {0.5, 1.0 / 3.0, 1.0 / 6.0, 0.0};
    for (int p = 0; p < 4; ++p) {
        double freq = double(hits[p]) / n;
        double sd = std::sqrt(want[p] * (1 - want[p]) / n + 1e-18);
        CHECK(std::abs(freq - want[p]) <= 3 * sd + 1e-12);
    }
}

TEST_CASE("ecn variant prefers the less marked path") {
    PathScoreboard b(2, 10'000);
    for (int i = 0; i < 100; ++i) b.record_ecn(0, true);
    RngStream rng(3, "lbecn");
    for (int i = 0; i < 100; ++i) CHECK(select_path(LbPolicy::p2_ecn, b, rng) == 1);
    // rtt variant is blind to marks: both paths still at the rtt prior,
    // so path 0 wins every tie.
    for (int i = 0; i < 100; ++i) CHECK(select_path(LbPolicy::p2_rtt, b, rng) == 0);
}

TEST_CASE("oblivious spraying is uniform") {
    PathScoreboard b(8, 10'000);
    RngStream rng(4, "lbuni");
    const int n = 100'000;
    std::vector<int> hits(8, 0);
    for (int i = 0; i < n; ++i) hits[select_path(LbPolicy::oblivious, b, rng)]++;
    double want = 1.0 / 8.0;
    double sd = std::sqrt(want * (1 - want) / n);
    for (int p = 0; p < 8; ++p)
        CHECK(std::abs(double(hits[p]) / n - want) <= 3 * sd);
}

TEST_CASE("selection is deterministic per seed and single-path trivial") {
    PathScoreboard b(16, 10'000);
    RngStream r1(9, "det"), r2(9, "det"), r3(10, "det");
    std::vector<int> s1, s2, s3;
    for (int i = 0; i < 1000; ++i) {
        s1.push_back(select_path(LbPolicy::oblivious, b, r1));
        s2.push_back(select_path(LbPolicy::oblivious, b, r2));
        s3.push_back(select_path(LbPolicy::oblivious, b, r3));
    }
    CHECK(s1 == s2);
    CHECK(s1 != s3);

    PathScoreboard one(1, 5000);
    RngStream r(1, "one");
    CHECK(select_path(LbPolicy::p2_rtt, one, r) == 0);
}
