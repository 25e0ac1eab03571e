#include "chunknet/wire.hpp"

#include <cstdint>
#include <random>

#include "doctest.h"

using namespace chunknet;

namespace {

// Reference packing built from the documented field positions, kept separate
// from the implementation so layout regressions cannot hide.
uint32_t ref_pack(uint8_t conn, uint8_t msg, uint8_t csn, bool last, uint8_t rsvd) {
    uint32_t v = 0;
    v |= static_cast<uint32_t>(conn) << 24;
    v |= static_cast<uint32_t>(msg) << 17;
    v |= static_cast<uint32_t>(csn) << 9;
    if (last) v |= 1u << 8;
    v |= rsvd;
    return v;
}

// Window membership and ordering computed on unwrapped integers.
bool ref_in_window(uint8_t base, int width, uint8_t x) {
    int off = (256 + int{x} - int{base}) % 256;
    return off < width;
}

}  // namespace

TEST_CASE("header encodes into documented bit positions") {
    CHECK(encode_header({5, 3, 200, true, 0}) == 0x05079100u);
    CHECK(encode_header({0, 0, 0, false, 0}) == 0x00000000u);
    CHECK(encode_header({255, 127, 255, true, 255}) == 0xFFFFFFFFu);
    // Single-field probes pin each shift amount.
    CHECK(encode_header({1, 0, 0, false, 0}) == (1u << 24));
    CHECK(encode_header({0, 1, 0, false, 0}) == (1u << 17));
    CHECK(encode_header({0, 0, 1, false, 0}) == (1u << 9));
    CHECK(encode_header({0, 0, 0, true, 0}) == (1u << 8));
    CHECK(encode_header({0, 0, 0, false, 1}) == 1u);
}

TEST_CASE("header round-trips exhaustively per field") {
    for (int conn = 0; conn < 256; ++conn) {
        ControlHeader h{static_cast<uint8_t>(conn), 9, 77, false, 3};
        CHECK(decode_header(encode_header(h)) == h);
    }
    for (int msg = 0; msg < 128; ++msg) {
        ControlHeader h{11, static_cast<uint8_t>(msg), 0, true, 255};
        CHECK(decode_header(encode_header(h)) == h);
    }
    for (int csn = 0; csn < 256; ++csn) {
        ControlHeader h{0, 127, static_cast<uint8_t>(csn), false, 0};
        CHECK(decode_header(encode_header(h)) == h);
    }
    for (int rsvd = 0; rsvd < 256; ++rsvd) {
        ControlHeader h{200, 64, 128, true, static_cast<uint8_t>(rsvd)};
        CHECK(decode_header(encode_header(h)) == h);
    }
}

TEST_CASE("header matches reference packing on random joint values") {
    std::mt19937_64 rng(12345);
    for (int i = 0; i < 100000; ++i) {
        uint64_t r = rng();
        ControlHeader h{static_cast<uint8_t>(r),
                        static_cast<uint8_t>((r >> 8) & 0x7F),
                        static_cast<uint8_t>(r >> 16),
                        ((r >> 24) & 1) != 0,
                        static_cast<uint8_t>(r >> 32)};
        uint32_t w = encode_header(h);
        CHECK(w == ref_pack(h.conn_id, h.msg_id, h.csn, h.last_chunk, h.reserved));
        CHECK(decode_header(w) == h);
    }
}

TEST_CASE("every 32-bit word is a valid header") {
    std::mt19937_64 rng(777);
    for (int i = 0; i < 100000; ++i) {
        uint32_t w = static_cast<uint32_t>(rng());
        CHECK(encode_header(decode_header(w)) == w);
    }
}

TEST_CASE("msg_id beyond 7 bits is rejected") {
    CHECK_THROWS_AS(encode_header({0, 128, 0, false, 0}), FieldRangeError);
    CHECK_THROWS_AS(encode_header({0, 255, 0, false, 0}), FieldRangeError);
    CHECK_NOTHROW(encode_header({0, 127, 0, false, 0}));
}

TEST_CASE("sequence window construction bounds") {
    CHECK_THROWS_AS(SeqWindow(0, 0), FieldRangeError);
    CHECK_THROWS_AS(SeqWindow(0, 129), FieldRangeError);
    CHECK_NOTHROW(SeqWindow(0, 128));
    CHECK_NOTHROW(SeqWindow(255, 1));
}

TEST_CASE("wrap-around ordering agrees with unwrapped integers") {
    const int widths[] = {1, 2, 63, 100, 127, 128};
    for (int w : widths) {
        for (int base = 0; base < 256; ++base) {
            SeqWindow win{static_cast<uint8_t>(base), w};
            for (int i = 0; i < w; ++i) {
                uint8_t a = static_cast<uint8_t>(base + i);
                for (int j = 0; j < w; ++j) {
                    uint8_t b = static_cast<uint8_t>(base + j);
                    bool expect = i < j;
                    if (csn_before(a, b, win) != expect) {
                        // Report one concrete failure instead of 12M checks.
                        CAPTURE(w);
                        CAPTURE(base);
                        CAPTURE(i);
                        CAPTURE(j);
                        REQUIRE(csn_before(a, b, win) == expect);
                    }
                }
            }
        }
    }
    CHECK(true);  // reached: all (width, base, a, b) combinations agreed
}

TEST_CASE("ordering near the wrap point") {
    SeqWindow win{250, 12};
    CHECK(csn_before(254, 2, win));
    CHECK(csn_before(255, 0, win));
    CHECK_FALSE(csn_before(3, 252, win));
    CHECK_FALSE(csn_before(0, 0, win));  // irreflexive
}

TEST_CASE("sequence values outside the window are rejected") {
    SeqWindow win{10, 5};  // valid: 10..14
    CHECK_THROWS_AS(csn_before(15, 12, win), OutOfWindowError);
    CHECK_THROWS_AS(csn_before(12, 9, win), OutOfWindowError);
    CHECK_THROWS_AS(csn_before(100, 200, win), OutOfWindowError);
    CHECK_NOTHROW(csn_before(10, 14, win));

    SeqWindow wrap{250, 12};  // valid: 250..255, 0..5
    CHECK_NOTHROW(csn_before(5, 250, wrap));
    CHECK_THROWS_AS(csn_before(6, 250, wrap), OutOfWindowError);
    for (int base = 0; base < 256; ++base)
        for (int width : {1, 64, 128}) {
            SeqWindow sw{static_cast<uint8_t>(base), width};
            for (int x = 0; x < 256; x += 7)
                CHECK(csn_in_window(static_cast<uint8_t>(x), sw) ==
                      ref_in_window(static_cast<uint8_t>(base), width,
                                    static_cast<uint8_t>(x)));
        }
}
