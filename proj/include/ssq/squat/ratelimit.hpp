#pragma once

#include <algorithm>
#include <mutex>

#include "ssq/common.hpp"
#include "ssq/squat/clock.hpp"

namespace ssq::squat {

// Token bucket: `rate` tokens per second up to `burst`. acquire() blocks via
// the injected clock until a token is available.
class TokenBucket {
  public:
    TokenBucket(double rate, double burst, Clock& clock)
        : rate_(rate), burst_(burst), tokens_(burst), clock_(clock), last_(clock.now_s()) {
        if (rate <= 0 || burst <= 0) throw ConfigError("rate and burst must be positive");
    }

    bool try_acquire() {
        std::lock_guard<std::mutex> lock(mu_);
        refill();
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return true;
        }
        return false;
    }

    void acquire() {
        for (;;) {
            double wait = 0.0;
            {
                std::lock_guard<std::mutex> lock(mu_);
                refill();
                if (tokens_ >= 1.0) {
                    tokens_ -= 1.0;
                    return;
                }
                wait = (1.0 - tokens_) / rate_;
            }
            clock_.sleep_s(wait);
        }
    }

  private:
    void refill() {
        const double now = clock_.now_s();
        tokens_ = std::min(burst_, tokens_ + (now - last_) * rate_);
        last_ = now;
    }

    std::mutex mu_;
    double rate_, burst_, tokens_;
    Clock& clock_;
    double last_;
};

}  // namespace ssq::squat
