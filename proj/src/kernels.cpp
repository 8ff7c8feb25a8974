#include "fedsim/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"

namespace fedsim::kernels {
namespace {

bool cpu_has_avx2() {
#if FEDSIM_HAVE_AVX2_TU && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* env = std::getenv("FEDSIM_SIMD");
  if (env != nullptr && std::string(env) == "scalar") return &detail::kScalarTable;
  if (const KernelTable* t = avx2_table()) return t;
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() { return detail::kScalarTable; }

const KernelTable* avx2_table() {
#if FEDSIM_HAVE_AVX2_TU
  static const bool ok = cpu_has_avx2();
  return ok ? &detail::kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

bool select_backend(Backend backend) {
  const KernelTable* t = backend == Backend::Scalar ? &detail::kScalarTable : avx2_table();
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_relaxed);
  return true;
}

std::string_view active_name() { return active().name; }

}  // namespace fedsim::kernels
