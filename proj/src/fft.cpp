#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <new>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace gpdf::detail {
namespace {

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int dimension, int n, int sign, bool aligned) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(dimension, n, sign, aligned);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    std::size_t total = 1;
    int dims[3];
    for (int a = 0; a < dimension; ++a) {
      dims[a] = n;
      total *= static_cast<std::size_t>(n);
    }
    // FFTW_ESTIMATE keeps the plan choice deterministic across runs.  The
    // aligned variant enables SIMD codelets and is used whenever the caller's
    // buffer has the same alignment as fftw_malloc memory.
    auto* buf = fftw_alloc_complex(total);
    if (buf == nullptr) throw std::bad_alloc();
    const unsigned flags = FFTW_ESTIMATE | (aligned ? 0u : FFTW_UNALIGNED);
    fftw_plan plan = fftw_plan_dft(dimension, dims, buf, buf, sign, flags);
    fftw_free(buf);
    if (plan == nullptr) throw std::runtime_error("fftw: failed to create plan");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int, bool>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

}  // namespace

void fft_inplace(std::span<std::complex<double>> data, int dimension, int n, int sign) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  const bool aligned = fftw_alignment_of(reinterpret_cast<double*>(buf)) == 0;
  fftw_plan plan = cache().get(dimension, n, sign, aligned);
  fftw_execute_dft(plan, buf, buf);
}

}  // namespace gpdf::detail
