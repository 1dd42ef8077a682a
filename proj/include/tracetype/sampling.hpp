#pragma once

// Overhead-budgeted event sampling.
//
// Instrumented locations are disabled after they produce an event; a periodic
// profiling tick records whether execution was inside tool code and, while the
// windowed share of such ticks stays under budget, re-enables every location.
// Re-enabling is O(1): each location carries the epoch at which it was
// disabled and the controller bumps its epoch.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <mutex>
#include <stdexcept>

namespace tracetype {

struct SamplingConfig {
    double budget = 0.05;
    std::chrono::milliseconds tick_interval{10};
    std::size_t window = 100;
};

/// Per-location enable state. Zero means "never disabled".
struct LocationState {
    std::uint64_t disabled_epoch = 0;
};

class SamplingController {
public:
    explicit SamplingController(SamplingConfig cfg = {}) : cfg_(cfg) {
        if (!(cfg_.budget > 0.0 && cfg_.budget <= 1.0)) throw std::invalid_argument("budget must be in (0, 1]");
        if (cfg_.window == 0) throw std::invalid_argument("window must be positive");
    }

    SamplingConfig const& config() const { return cfg_; }

    /// Records one profiling sample. Returns true when the updated estimate is
    /// below budget, in which case all disabled locations were re-enabled.
    bool profile_tick(bool in_tool_code) {
        std::lock_guard lock(mutex_);
        window_.push_back(in_tool_code);
        in_tool_ += in_tool_code ? 1 : 0;
        if (window_.size() > cfg_.window) {
            in_tool_ -= window_.front() ? 1 : 0;
            window_.pop_front();
        }
        double fraction = static_cast<double>(in_tool_) / static_cast<double>(window_.size());
        fraction_.store(fraction, std::memory_order_relaxed);
        bool below = fraction < cfg_.budget;
        over_budget_.store(!below, std::memory_order_relaxed);
        if (below) reenable_all();
        return below;
    }

    /// Windowed share of ticks that landed in tool code; 0 before any tick.
    double self_fraction() const { return fraction_.load(std::memory_order_relaxed); }

    /// True once a tick has observed the estimate at or above budget, until a
    /// later tick drops below it.
    bool over_budget() const { return over_budget_.load(std::memory_order_relaxed); }

    std::uint64_t epoch() const { return epoch_.load(std::memory_order_acquire); }

    bool is_disabled(LocationState const& loc) const { return loc.disabled_epoch == epoch(); }

    void disable(LocationState& loc) {
        auto e = epoch();
        if (loc.disabled_epoch != e) {
            loc.disabled_epoch = e;
            disabled_.fetch_add(1, std::memory_order_relaxed);
        }
    }

    void reenable_all() {
        epoch_.fetch_add(1, std::memory_order_acq_rel);
        disabled_.store(0, std::memory_order_relaxed);
    }

    /// Locations disabled since the last re-enable.
    std::size_t disabled_count() const { return disabled_.load(std::memory_order_relaxed); }

private:
    SamplingConfig cfg_;
    std::mutex mutex_;
    std::deque<bool> window_;
    std::size_t in_tool_ = 0;
    std::atomic<double> fraction_{0.0};
    std::atomic<bool> over_budget_{false};
    std::atomic<std::uint64_t> epoch_{1};
    std::atomic<std::size_t> disabled_{0};
};

} // namespace tracetype
