#pragma once

#include <chrono>
#include <mutex>
#include <thread>

namespace ssq::squat {

// Injectable time source so probing behavior (rate limits, backoff, cache
// TTLs) is testable under a simulated clock.
class Clock {
  public:
    virtual ~Clock() = default;
    virtual double now_s() = 0;
    virtual void sleep_s(double seconds) = 0;
};

class RealClock : public Clock {
  public:
    double now_s() override {
        return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
            .count();
    }
    void sleep_s(double seconds) override {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
};

// Virtual clock: sleeping advances time instantly.
class SimClock : public Clock {
  public:
    explicit SimClock(double start = 0.0) : now_(start) {}
    double now_s() override {
        std::lock_guard<std::mutex> lock(mu_);
        return now_;
    }
    void sleep_s(double seconds) override {
        std::lock_guard<std::mutex> lock(mu_);
        now_ += seconds;
    }

  private:
    std::mutex mu_;
    double now_;
};

}  // namespace ssq::squat
