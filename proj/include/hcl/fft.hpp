#pragma once

// Thin RAII layer over FFTW's real-data transforms.

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <map>
#include <new>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace hcl {

namespace detail {

// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    if (p) {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(p);
    }
  }
};
using PlanHandle = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using AlignedArray = std::unique_ptr<T[], FftwFree>;

template <class T>
AlignedArray<T> aligned_array(std::size_t count) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * count));
  if (!p) throw std::bad_alloc();
  return AlignedArray<T>(p);
}

}  // namespace detail

inline bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

/// Unnormalized real <-> half-complex transforms of fixed length n.
/// forward:  X[k] = sum_j x[j] e^{-2 pi i jk/n},  k = 0..n/2
/// inverse:  x[j] = sum_k X[k] e^{+2 pi i jk/n}   (no 1/n factor)
///
/// Transforms run in FFTW-aligned internal buffers so SIMD codelets apply
/// whatever the caller's alignment; FFTW_ESTIMATE keeps plans, and therefore
/// results, reproducible from run to run.
class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n), real_(detail::aligned_array<double>(n)), complex_(detail::aligned_array<fftw_complex>(n / 2 + 1)) {
    if (n < 2) throw std::invalid_argument("RealFft: length must be >= 2");
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), real_.get(), complex_.get(), FFTW_ESTIMATE));
    inverse_.reset(
        fftw_plan_dft_c2r_1d(static_cast<int>(n), complex_.get(), real_.get(), FFTW_ESTIMATE | FFTW_DESTROY_INPUT));
    if (!forward_ || !inverse_) throw std::runtime_error("RealFft: FFTW planning failed");
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) const {
    check(in.size() == n_ && out.size() == bins());
    std::copy(in.begin(), in.end(), real_.get());
    fftw_execute(forward_.get());
    const auto* c = reinterpret_cast<const std::complex<double>*>(complex_.get());
    std::copy(c, c + bins(), out.begin());
  }

  void inverse(std::span<const std::complex<double>> in, std::span<double> out) const {
    check(in.size() == bins() && out.size() == n_);
    std::copy(in.begin(), in.end(), reinterpret_cast<std::complex<double>*>(complex_.get()));
    fftw_execute(inverse_.get());
    std::copy(real_.get(), real_.get() + n_, out.begin());
  }

  std::vector<std::complex<double>> forward(std::span<const double> in) const {
    std::vector<std::complex<double>> out(bins());
    forward(in, out);
    return out;
  }

 private:
  static void check(bool ok) {
    if (!ok) throw std::invalid_argument("RealFft: buffer size mismatch");
  }

  std::size_t n_;
  detail::AlignedArray<double> real_;
  detail::AlignedArray<fftw_complex> complex_;
  detail::PlanHandle forward_;
  detail::PlanHandle inverse_;
};

/// Per-thread transform of length n, planned on first use and kept for reuse.
inline const RealFft& cached_fft(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

}  // namespace hcl
