#ifndef CHUNKNET_WIRE_HPP
#define CHUNKNET_WIRE_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace chunknet {

// The 32-bit per-chunk control word carried by every data packet.
//
// Bit layout (most significant first):
//   [31:24] conn_id      connection id within a NIC pair   (8 bits)
//   [23:17] msg_id       in-flight message id              (7 bits)
//   [16:9]  csn          chunk sequence number             (8 bits)
//   [8]     last_chunk   set on the final chunk of a message
//   [7:0]   reserved     credit/extension byte, see eqds.hpp
struct ControlHeader {
    uint8_t conn_id = 0;
    uint8_t msg_id = 0;  // 0..127
    uint8_t csn = 0;
    bool last_chunk = false;
    uint8_t reserved = 0;

    bool operator==(const ControlHeader&) const = default;
};

// Thrown when a header field does not fit its declared bit width.
class FieldRangeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when a CSN falls outside the window span handed to csn_before().
// Callers treat the condition as stale/duplicate, so they normally test
// csn_in_window() first and never see this.
class OutOfWindowError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

uint32_t encode_header(const ControlHeader& h);
ControlHeader decode_header(uint32_t word);

// Sliding window over the 8-bit CSN space. width <= 128 keeps the
// wrap-around comparison unambiguous (strictly within half the space).
struct SeqWindow {
    uint8_t base_csn = 0;  // oldest unacked
    int width = 128;       // 1..128

    SeqWindow() = default;
    SeqWindow(uint8_t base, int w) : base_csn(base), width(w) {
        if (w < 1 || w > 128)
            throw FieldRangeError("SeqWindow width must be in [1,128], got " +
                                  std::to_string(w));
    }

    // Offset of csn from base under modulo-256 arithmetic.
    int offset_of(uint8_t csn) const {
        return static_cast<uint8_t>(csn - base_csn);
    }
};

inline bool csn_in_window(uint8_t csn, const SeqWindow& w) {
    return w.offset_of(csn) < w.width;
}

// Strict order of two in-window CSNs. Total, antisymmetric and transitive
// inside any window of width <= 128.
bool csn_before(uint8_t a, uint8_t b, const SeqWindow& w);

}  // namespace chunknet

#endif  // CHUNKNET_WIRE_HPP
