#pragma once

// Thin FFTW wrapper: cached 1-D complex plans, usable from worker threads.

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "sid/common.hpp"

namespace sid::fft {

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<Complex> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                   reinterpret_cast<fftw_complex*>(b.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }

  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

inline void execute(std::vector<Complex>& data, int sign) {
  const int n = static_cast<int>(data.size());
  if (n <= 1) return;
  std::vector<Complex> out(data.size());
  fftw_plan p = PlanCache::instance().get(n, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  data.swap(out);
}

}  // namespace detail

/// X_k = sum_j x_j exp(-2 pi i j k / n), unnormalized.
inline void forward(std::vector<Complex>& data) { detail::execute(data, FFTW_FORWARD); }

/// x_j = (1/n) sum_k X_k exp(+2 pi i j k / n).
inline void inverse(std::vector<Complex>& data) {
  detail::execute(data, FFTW_BACKWARD);
  const double s = 1.0 / static_cast<double>(data.size());
  for (auto& z : data) z *= s;
}

/// Signed frequency index of bin k for an n-point transform; the Nyquist
/// bin of an even transform maps to +n/2.
inline long signed_index(std::size_t k, std::size_t n) {
  const auto kk = static_cast<long>(k);
  const auto nn = static_cast<long>(n);
  return kk <= nn / 2 ? kk : kk - nn;
}

}  // namespace sid::fft
