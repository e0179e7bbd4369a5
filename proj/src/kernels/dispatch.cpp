#include <atomic>
#include <cstdlib>
#include <string>

#include "ewfm/error.hpp"
#include "ewfm/kernels.hpp"

namespace ewfm::kernels {

#ifndef EWFM_HAVE_AVX2
const Table* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* initial_table() {
  if (const char* env = std::getenv("EWFM_KERNELS"); env && *env) {
    const Isa requested = parse_isa(env);
    if (!supported(requested)) throw InvalidInput(std::string("EWFM_KERNELS=") + env + " is not supported here");
    return &table(requested);
  }
  return supported(Isa::avx2) ? avx2_table() : &scalar_table();
}

std::atomic<const Table*>& slot() {
  static std::atomic<const Table*> current{initial_table()};
  return current;
}

}  // namespace

bool supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return avx2_table() != nullptr && cpu_has_avx2();
  }
  return false;
}

const Table& table(Isa isa) {
  if (!supported(isa)) throw InvalidInput("kernel ISA " + std::string(isa_name(isa)) + " unavailable");
  return isa == Isa::avx2 ? *avx2_table() : scalar_table();
}

const Table& active() { return *slot().load(std::memory_order_acquire); }

Isa active_isa() { return active().isa; }

void select(Isa isa) { slot().store(&table(isa), std::memory_order_release); }

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  throw InvalidInput("unknown kernel ISA '" + std::string(name) + "'");
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace ewfm::kernels
