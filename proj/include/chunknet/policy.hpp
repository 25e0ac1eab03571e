#ifndef CHUNKNET_POLICY_HPP
#define CHUNKNET_POLICY_HPP

#include <cstdint>

#include "chunknet/event_queue.hpp"
#include "chunknet/lb.hpp"
#include "chunknet/rng.hpp"

namespace chunknet {

// Everything a policy callback may inspect about one chunk.
struct ChunkView {
    int src = -1;
    int dst = -1;
    uint8_t msg_id = 0;
    uint64_t msg_seq = 0;    // per-connection message generation
    uint64_t msg_len = 0;
    uint64_t offset = 0;     // chunk offset within the message
    uint32_t len = 0;
    uint8_t csn = 0;
    bool last = false;
    int attempts = 0;        // transmissions so far (0 for a fresh chunk)
    int prev_path = -1;      // path of the previous attempt
    uint64_t remaining = 0;  // unchunked bytes left in the message
};

struct AckView {
    int path = 0;
    SimTime rtt = 0;  // 0 when the sample was suppressed (retransmitted chunk)
    bool ecn = false;
    uint32_t acked_bytes = 0;
};

// Decision points the transport engine defers to. The engine owns windows,
// sequencing, retransmission state and timers; the policy decides how a
// message is cut into chunks, when and where each chunk goes, and reacts
// to receiver feedback. All hooks run at simulation-event granularity.
class TransportPolicy {
  public:
    virtual ~TransportPolicy() = default;

    // Size of the next chunk of a message; must be in [1, remaining].
    virtual uint32_t on_chunk_size(uint64_t remaining) = 0;

    // Extra delay before the chunk may leave (0 = immediately).
    virtual SimTime on_pacing_chunk(const ChunkView&) { return 0; }

    // Path for a fresh chunk, in [0, board.n_paths()).
    virtual int on_select_path(const ChunkView&, const PathScoreboard& board,
                               RngStream& rng) = 0;

    // Path for a retransmission; -1 delegates to on_select_path.
    virtual int on_tx_rtx_chunk(const ChunkView&, const PathScoreboard&,
                                RngStream&) {
        return -1;
    }

    // Receiver-side notification of a complete chunk (first delivery /
    // retransmitted delivery).
    virtual void on_rx_chunk(const ChunkView&) {}
    virtual void on_rx_rtx_chunk(const ChunkView&) {}

    // Sender-side notification of ack / credit arrival.
    virtual void on_rx_ack(const AckView&) {}
    virtual void on_rx_credit(uint32_t /*credit_bytes*/) {}
};

// Fixed chunking plus a configurable spraying discipline.
class DefaultPolicy : public TransportPolicy {
  public:
    DefaultPolicy(uint32_t chunk_bytes, LbPolicy lb, bool rtx_avoid_prev_path)
        : chunk_bytes_(chunk_bytes), lb_(lb), rtx_avoid_prev_(rtx_avoid_prev_path) {}

    uint32_t on_chunk_size(uint64_t remaining) override {
        return static_cast<uint32_t>(
            remaining < chunk_bytes_ ? remaining : chunk_bytes_);
    }

    int on_select_path(const ChunkView&, const PathScoreboard& board,
                       RngStream& rng) override {
        return select_path(lb_, board, rng);
    }

    int on_tx_rtx_chunk(const ChunkView& c, const PathScoreboard& board,
                        RngStream& rng) override {
        int p = select_path(lb_, board, rng);
        if (rtx_avoid_prev_ && board.n_paths() > 1 && p == c.prev_path)
            p = (p + 1) % board.n_paths();
        return p;
    }

  private:
    uint32_t chunk_bytes_;
    LbPolicy lb_;
    bool rtx_avoid_prev_;
};

}  // namespace chunknet

#endif  // CHUNKNET_POLICY_HPP
