#pragma once

#include <chrono>
#include <functional>
#include <initializer_list>
#include <thread>

#include "mmv/error.hpp"

namespace mmv {

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_delay{1000};
  double multiplier = 2.0;
};

// Runs fn up to policy.attempts times, sleeping initial_delay * multiplier^i
// between tries. Only errors whose code is in `retry_on` are retried; the
// last one is rethrown once attempts run out.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, std::initializer_list<Errc> retry_on, const Sleeper& sleep, Fn&& fn,
                  int* attempts_made = nullptr) -> decltype(fn()) {
  auto delay = policy.initial_delay;
  for (int attempt = 1;; ++attempt) {
    if (attempts_made != nullptr) *attempts_made = attempt;
    try {
      return fn();
    } catch (const Error& e) {
      bool retryable = false;
      for (Errc c : retry_on) retryable = retryable || c == e.code();
      if (!retryable || attempt >= policy.attempts) throw;
    }
    if (sleep) sleep(delay);
    delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
  }
}

}  // namespace mmv
