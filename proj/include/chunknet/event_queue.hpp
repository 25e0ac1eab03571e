#ifndef CHUNKNET_EVENT_QUEUE_HPP
#define CHUNKNET_EVENT_QUEUE_HPP

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace chunknet {

using SimTime = int64_t;  // nanoseconds

// Time-ordered event set with deterministic tie-breaking: events at equal
// time run in insertion order, so identical inputs replay identically.
class EventQueue {
  public:
    SimTime now() const { return now_; }

    void schedule(SimTime t, std::function<void()> fn) {
        if (t < now_)
            throw std::logic_error("event scheduled in the past: t=" +
                                   std::to_string(t) +
                                   " now=" + std::to_string(now_));
        heap_.push(Entry{t, next_seq_++, std::move(fn)});
    }

    void schedule_in(SimTime dt, std::function<void()> fn) {
        schedule(now_ + dt, std::move(fn));
    }

    bool empty() const { return heap_.empty(); }
    size_t pending() const { return heap_.size(); }

    // Executes all events with time <= t_end; returns how many ran.
    uint64_t run_until(SimTime t_end) {
        if (t_end < now_)
            throw std::logic_error("run_until into the past");
        uint64_t executed = 0;
        while (!heap_.empty() && heap_.top().t <= t_end) {
            Entry e = heap_.top();
            heap_.pop();
            now_ = e.t;
            e.fn();
            ++executed;
        }
        now_ = t_end;
        return executed;
    }

    // Runs until no events remain or the cutoff is reached. Returns true
    // if the queue drained before the cutoff.
    bool run_until_idle(SimTime cutoff) {
        while (!heap_.empty() && heap_.top().t <= cutoff) {
            Entry e = heap_.top();
            heap_.pop();
            now_ = e.t;
            e.fn();
        }
        return heap_.empty();
    }

  private:
    struct Entry {
        SimTime t;
        uint64_t seq;
        std::function<void()> fn;
        bool operator>(const Entry& o) const {
            if (t != o.t) return t > o.t;
            return seq > o.seq;
        }
    };

    SimTime now_ = 0;
    uint64_t next_seq_ = 0;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap_;
};

}  // namespace chunknet

#endif  // CHUNKNET_EVENT_QUEUE_HPP
