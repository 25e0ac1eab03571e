#include "chunknet/wire.hpp"

namespace chunknet {

uint32_t encode_header(const ControlHeader& h) {
    if (h.msg_id > 127)
        throw FieldRangeError("msg_id must fit 7 bits, got " +
                              std::to_string(h.msg_id));
    // conn_id, csn and reserved are uint8_t and cannot overflow their fields.
    return (static_cast<uint32_t>(h.conn_id) << 24) |
           (static_cast<uint32_t>(h.msg_id) << 17) |
           (static_cast<uint32_t>(h.csn) << 9) |
           (h.last_chunk ? 1u << 8 : 0u) | static_cast<uint32_t>(h.reserved);
}

ControlHeader decode_header(uint32_t word) {
    ControlHeader h;
    h.conn_id = static_cast<uint8_t>(word >> 24);
    h.msg_id = static_cast<uint8_t>((word >> 17) & 0x7f);
    h.csn = static_cast<uint8_t>((word >> 9) & 0xff);
    h.last_chunk = (word >> 8) & 1u;
    h.reserved = static_cast<uint8_t>(word & 0xff);
    return h;
}

bool csn_before(uint8_t a, uint8_t b, const SeqWindow& w) {
    if (!csn_in_window(a, w))
        throw OutOfWindowError("csn " + std::to_string(a) +
                               " outside window base=" +
                               std::to_string(w.base_csn) +
                               " width=" + std::to_string(w.width));
    if (!csn_in_window(b, w))
        throw OutOfWindowError("csn " + std::to_string(b) +
                               " outside window base=" +
                               std::to_string(w.base_csn) +
                               " width=" + std::to_string(w.width));
    // Both offsets lie in [0,128), so the signed 8-bit difference carries
    // the order directly.
    return static_cast<int8_t>(a - b) < 0;
}

}  // namespace chunknet
