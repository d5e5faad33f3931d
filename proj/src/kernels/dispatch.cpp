#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ringbalance/kernels.hpp"

namespace ringbalance::kernels {

#ifndef RB_HAVE_AVX2
namespace detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace detail
#endif
#ifndef RB_HAVE_NEON
namespace detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace detail
#endif

namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(RB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(RB_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* compiled(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return &scalar_table();
    case Isa::kAvx2: return detail::avx2_table();
    case Isa::kNeon: return detail::neon_table();
  }
  return nullptr;
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("RINGBALANCE_KERNELS"); env && std::string(env) == "scalar") {
    return &scalar_table();
  }
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (compiled(isa) && cpu_supports(isa)) return compiled(isa);
  }
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "?";
}

std::vector<Isa> available() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
    if (compiled(isa) && cpu_supports(isa)) out.push_back(isa);
  }
  return out;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

const KernelTable& table(Isa isa) {
  const KernelTable* t = compiled(isa);
  if (!t || !cpu_supports(isa)) {
    throw std::invalid_argument("kernel variant '" + std::string(name(isa)) + "' is not available");
  }
  return *t;
}

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

}  // namespace ringbalance::kernels
