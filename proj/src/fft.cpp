#include "parahom/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace parahom::fft {

namespace {

using PlanKey = std::tuple<std::vector<int>, int, int>;

class PlanCache {
 public:
  ~PlanCache() {
    std::lock_guard lk(mu_);
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }

  fftw_plan get(const std::vector<int>& dims, int howmany, int sign) {
    std::lock_guard lk(mu_);
    PlanKey key{dims, howmany, sign};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::size_t n = 1;
    for (int v : dims) n *= static_cast<std::size_t>(v);
    auto* buf = fftw_alloc_complex(n * static_cast<std::size_t>(howmany));
    // FFTW_UNALIGNED: execution buffers come from std::vector with arbitrary alignment.
    fftw_plan p = fftw_plan_many_dft(static_cast<int>(dims.size()), dims.data(), howmany, buf, nullptr, 1,
                                     static_cast<int>(n), buf, nullptr, 1, static_cast<int>(n), sign,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    plans_.emplace(std::move(key), p);
    return p;
  }

 private:
  std::mutex mu_;
  std::map<PlanKey, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void run(std::span<cplx> data, const std::vector<int>& dims, int howmany, int sign) {
  std::size_t n = 1;
  for (int v : dims) n *= static_cast<std::size_t>(v);
  if (data.size() != n * static_cast<std::size_t>(howmany)) throw DimensionError("fft: buffer size mismatch");
  fftw_plan p = cache().get(dims, howmany, sign);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(p, ptr, ptr);
}

}  // namespace

void forward(std::span<cplx> data, const std::vector<int>& dims, int howmany) {
  run(data, dims, howmany, FFTW_FORWARD);
}

void backward(std::span<cplx> data, const std::vector<int>& dims, int howmany) {
  run(data, dims, howmany, FFTW_BACKWARD);
}

double frequency(int k, int L) noexcept {
  int kk = k % L;
  if (kk < 0) kk += L;
  if (2 * kk > L) kk -= L;
  return 2.0 * std::numbers::pi * kk / L;
}

}  // namespace parahom::fft
