#include <atomic>

#include "uqf/error.hpp"
#include "uqf/kernels.hpp"

namespace uqf::kernels {

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(UQF_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(UQF_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (auto b : {Backend::scalar, Backend::avx2, Backend::neon}) {
    if (backend_available(b)) out.push_back(b);
  }
  return out;
}

Backend detect_backend() {
  if (backend_available(Backend::avx2)) return Backend::avx2;
  if (backend_available(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

const KernelTable& table_for(Backend b) {
  if (!backend_available(b)) {
    throw ConfigError("kernel backend '" + std::string(backend_name(b)) + "' is not available on this CPU");
  }
  switch (b) {
#if defined(UQF_HAVE_AVX2)
    case Backend::avx2:
      return avx2_table();
#endif
#if defined(UQF_HAVE_NEON)
    case Backend::neon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

namespace {

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&table_for(detect_backend())};
  return slot;
}

}  // namespace

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

Backend active_backend() { return active().backend; }

void set_backend(Backend b) { active_slot().store(&table_for(b), std::memory_order_release); }

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

std::optional<Backend> parse_backend(std::string_view name) {
  if (name == "auto") return detect_backend();
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  if (name == "neon") return Backend::neon;
  return std::nullopt;
}

}  // namespace uqf::kernels
