#include "chemhop/throttle.hpp"

#include <thread>

namespace chemhop {

RateLimiter::RateLimiter(double per_second) {
  if (per_second > 0.0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    auto now = std::chrono::steady_clock::now();
    slot = next_ > now ? next_ : now;
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

InFlightLimiter::InFlightLimiter(int max_in_flight) : max_(max_in_flight < 1 ? 1 : max_in_flight) {}

void InFlightLimiter::enter() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return current_ < max_; });
  ++current_;
}

void InFlightLimiter::leave() {
  {
    std::lock_guard lock(mu_);
    --current_;
  }
  cv_.notify_one();
}

int InFlightLimiter::in_flight() const {
  std::lock_guard lock(mu_);
  return current_;
}

}  // namespace chemhop
