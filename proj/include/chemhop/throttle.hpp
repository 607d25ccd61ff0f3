#pragma once

#include <chrono>
#include <condition_variable>
#include <mutex>

namespace chemhop {

/// Spaces request starts so that at most `per_second` begin in any one-second window
/// (evenly paced). A non-positive rate disables pacing.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second = 0.0);
  void acquire();

 private:
  std::mutex mu_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

/// Bounds the number of concurrently running requests.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int max_in_flight = 8);

  class Slot {
   public:
    explicit Slot(InFlightLimiter& owner) : owner_(owner) { owner_.enter(); }
    ~Slot() { owner_.leave(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    InFlightLimiter& owner_;
  };

  int in_flight() const;

 private:
  void enter();
  void leave();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  int max_;
  int current_ = 0;
};

}  // namespace chemhop
