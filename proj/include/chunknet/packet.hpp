#ifndef CHUNKNET_PACKET_HPP
#define CHUNKNET_PACKET_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "chunknet/event_queue.hpp"
#include "chunknet/wire.hpp"

namespace chunknet {

enum class PacketKind : uint8_t {
    data,     // chunk payload segment
    ack,      // cumulative + selective acknowledgment
    nack,     // explicit negative ack (trimmed header or sequence gap)
    credit,   // receiver-paced transmission grant
    rts,      // request-to-send carrying sender demand
    rts_ack,  // receiver confirmation that an RTS was registered
};

inline bool is_control(PacketKind k) { return k != PacketKind::data; }

// 128-chunk selective-ack bitmap, bit i = chunk (cum_csn + 1 + i) received.
using SackBitmap = std::array<uint64_t, 2>;

inline bool sack_get(const SackBitmap& b, int i) {
    return (b[i >> 6] >> (i & 63)) & 1u;
}
inline void sack_set(SackBitmap& b, int i) { b[i >> 6] |= uint64_t{1} << (i & 63); }

struct Packet {
    PacketKind kind = PacketKind::data;
    uint64_t uid = 0;  // global sequence for tracing

    int32_t src = -1;  // source host
    int32_t dst = -1;  // destination host
    int32_t path_id = 0;

    ControlHeader hdr{};  // chunk control header (all kinds)

    // --- data packets ---
    uint64_t chunk_offset = 0;  // byte offset of the chunk within its message
    uint32_t chunk_len = 0;     // total chunk length in bytes
    uint32_t seq_in_chunk = 0;  // packet index within the chunk
    uint32_t payload_len = 0;   // bytes of payload in this packet
    uint64_t conn_psn = 0;      // connection-scoped sequence (ordered delivery mode)
    SimTime tx_time = 0;        // transmit timestamp, echoed by acks
    bool is_rtx = false;
    uint64_t msg_seq = 0;  // per-connection message generation (stale-dup guard)
    uint64_t msg_tag = 0;  // caller's flow tag, reported on completion
    uint64_t msg_len = 0;  // total message length
    // Concrete message bytes when payload integrity is exercised; null when
    // the experiment only tracks lengths.
    std::shared_ptr<const std::vector<uint8_t>> msg_data;

    // --- switch-set flags ---
    bool ecn = false;
    bool trimmed = false;  // payload removed at an overloaded queue

    // --- ack ---
    uint8_t cum_csn = 0;  // highest chunk csn received in order
    bool cum_valid = false;  // false until the first in-order chunk arrives
    SackBitmap sack{};
    SimTime echo_tx_time = 0;
    int32_t echo_path_id = 0;
    bool ecn_echo = false;

    // --- nack ---
    uint8_t nack_csn = 0;
    uint64_t nack_psn = 0;   // expected sequence (ordered delivery mode)
    bool nack_trim = false;  // true: trimmed-header nack; false: sequence gap

    // --- credit / rts ---
    uint32_t credit_bytes = 0;
    uint64_t demand_bytes = 0;

    // --- routing state (owned by the network) ---
    std::vector<int32_t> route;  // node ids, route[0] = src host
    int32_t hop = 0;

    uint32_t wire_bytes(uint32_t hdr_overhead) const {
        return hdr_overhead + (trimmed ? 0 : payload_len);
    }
};

}  // namespace chunknet

#endif  // CHUNKNET_PACKET_HPP
