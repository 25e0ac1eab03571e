#include "chunknet/eqds.hpp"

#include <algorithm>

namespace chunknet {

void EqdsReceiver::reclassify(int id, Sender& s) {
    List want;
    if (s.rtx_owed > 0)
        want = List::rtx;
    else if (s.demand > s.granted)
        want = List::active;
    else if (p_.grant_to_idle && s.granted < p_.bank_cap)
        want = List::idle;
    else
        want = List::none;  // parked: bank full, nothing owed
    if (want == s.list) return;
    s.list = want;
    ++s.epoch;
    switch (want) {
        case List::rtx: rtx_q_.push_back({id, s.epoch}); break;
        case List::active: active_q_.push_back({id, s.epoch}); break;
        case List::idle: idle_q_.push_back({id, s.epoch}); break;
        case List::none: break;
    }
}

void EqdsReceiver::ensure_ticking() {
    if (ticking_) return;
    if (rtx_q_.empty() && active_q_.empty() && idle_q_.empty()) return;
    ticking_ = true;
    SimTime t = std::max(eq_.now(), next_grant_t_);
    eq_.schedule(t, [this] { tick(); });
}

int EqdsReceiver::pop_valid(std::deque<Entry>& dq, List want) {
    while (!dq.empty()) {
        auto [id, ep] = dq.front();
        dq.pop_front();
        auto it = senders_.find(id);
        if (it != senders_.end() && it->second.list == want &&
            it->second.epoch == ep)
            return id;
    }
    return -1;
}

void EqdsReceiver::tick() {
    ticking_ = false;
    int id = pop_valid(rtx_q_, List::rtx);
    if (id < 0) id = pop_valid(active_q_, List::active);
    if (id < 0) id = pop_valid(idle_q_, List::idle);
    if (id < 0) return;  // nothing to grant, pacer goes quiet

    Sender& s = senders_[id];
    s.granted += p_.quantum;
    if (s.rtx_owed > 0)
        s.rtx_owed = std::max<int64_t>(0, s.rtx_owed - p_.quantum);
    ++grants_sent_;
    next_grant_t_ = eq_.now() + p_.tick_ns;
    grant_(id, p_.quantum);

    // Back of whichever list the sender now belongs to: round robin.
    s.list = List::none;
    reclassify(id, s);
    ensure_ticking();
}

void EqdsReceiver::on_rts(int sender, uint64_t demand, bool rtx) {
    Sender& s = senders_[sender];
    // A sender only raises an RTS once its credit is exhausted, so the
    // request doubles as a resync point: any grant balance still on the
    // books is stale (credit burned by lost chunks never reports back, and
    // credit expired above the sender's bank cap is invisible here). Carrying
    // that phantom balance forward would classify the sender as satisfied
    // and park it forever.
    s.granted = 0;
    s.demand = static_cast<int64_t>(demand);
    if (rtx)
        s.rtx_owed = std::max<int64_t>(s.rtx_owed, p_.quantum);
    rts_ack_(sender);
    reclassify(sender, s);
    ensure_ticking();
}

void EqdsReceiver::on_chunk(int sender, uint32_t bytes, bool was_rtx) {
    Sender& s = senders_[sender];
    s.demand = std::max<int64_t>(0, s.demand - bytes);
    s.granted = std::max<int64_t>(0, s.granted - bytes);
    if (was_rtx) s.rtx_owed = std::max<int64_t>(0, s.rtx_owed - bytes);
    reclassify(sender, s);
    ensure_ticking();
}

void EqdsReceiver::on_trim(int sender, uint32_t chunk_len) {
    Sender& s = senders_[sender];
    // The trimmed chunk burned credit without delivering anything, so the
    // spent grant is re-owed with priority. Demand is untouched: it only
    // ever falls on delivery, and this chunk never delivered.
    s.granted = std::max<int64_t>(0, s.granted - chunk_len);
    s.rtx_owed += chunk_len;
    reclassify(sender, s);
    ensure_ticking();
}

int64_t EqdsReceiver::demand_of(int sender) const {
    auto it = senders_.find(sender);
    return it == senders_.end() ? 0 : it->second.demand;
}

int64_t EqdsReceiver::granted_of(int sender) const {
    auto it = senders_.find(sender);
    return it == senders_.end() ? 0 : it->second.granted;
}

}  // namespace chunknet
