#ifndef CHUNKNET_EQDS_HPP
#define CHUNKNET_EQDS_HPP

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <utility>

#include "chunknet/event_queue.hpp"

namespace chunknet {

struct EqdsParams {
    uint32_t quantum = 32768;   // credit unit
    SimTime tick_ns = 0;        // time to serialize one quantum at line rate
    int64_t bank_cap = 0;       // unused credit a sender may hold (4 quanta)
    bool grant_to_idle = true;  // trickle credit to idle senders up to the cap
};

// Receiver-side pull pacer: one per receiving host. Grants one credit
// quantum per tick to one sender, so aggregate granted bandwidth never
// exceeds the line rate. Senders needing retransmissions are served first,
// then senders with outstanding demand (round robin), then idle senders
// (topping up their bank until it holds bank_cap). A sender sits in exactly
// one list at a time; queue entries are epoch-stamped so a sender moving
// between lists invalidates its old position.
class EqdsReceiver {
  public:
    using GrantFn = std::function<void(int sender, uint32_t bytes)>;
    using RtsAckFn = std::function<void(int sender)>;

    EqdsReceiver(EventQueue& eq, const EqdsParams& p, GrantFn grant,
                 RtsAckFn rts_ack)
        : eq_(eq), p_(p), grant_(std::move(grant)), rts_ack_(std::move(rts_ack)) {}

    // Request-to-send: registers/updates the sender's outstanding demand.
    void on_rts(int sender, uint64_t demand, bool rtx);
    // A complete chunk arrived: the sender consumed that much credit.
    void on_chunk(int sender, uint32_t bytes, bool was_rtx);
    // A trimmed header arrived: the chunk burned credit without delivering
    // and must be resent with priority credit.
    void on_trim(int sender, uint32_t chunk_len);

    int64_t demand_of(int sender) const;
    int64_t granted_of(int sender) const;
    uint64_t grants_sent() const { return grants_sent_; }

  private:
    enum class List { none, rtx, active, idle };

    struct Sender {
        int64_t demand = 0;    // bytes the sender still wants to move
        int64_t granted = 0;   // credits granted but not yet consumed
        int64_t rtx_owed = 0;  // bytes owed for trimmed chunks
        List list = List::none;
        uint64_t epoch = 0;  // invalidates stale queue entries
    };

    using Entry = std::pair<int, uint64_t>;  // (sender, epoch)

    void reclassify(int id, Sender& s);
    void ensure_ticking();
    void tick();
    int pop_valid(std::deque<Entry>& dq, List want);

    EventQueue& eq_;
    EqdsParams p_;
    GrantFn grant_;
    RtsAckFn rts_ack_;
    std::map<int, Sender> senders_;
    std::deque<Entry> rtx_q_, active_q_, idle_q_;
    bool ticking_ = false;
    SimTime next_grant_t_ = 0;
    uint64_t grants_sent_ = 0;
};

}  // namespace chunknet

#endif  // CHUNKNET_EQDS_HPP
