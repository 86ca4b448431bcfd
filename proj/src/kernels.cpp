#include "pdl/kernels.hpp"

#include "pdl/common.hpp"

namespace pdl::kernels {

#if defined(__x86_64__) || defined(_M_X64)
const Ops* avx2_ops_table();  // defined in kernels_avx2.cpp
#endif

namespace {

bool cpu_has_avx2_fma() {
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops*& active_table() {
  static const Ops* table = avx2_available() ? avx2_ops() : &scalar_ops();
  return table;
}

}  // namespace

const Ops* avx2_ops() {
#if defined(__x86_64__) || defined(_M_X64)
  if (cpu_has_avx2_fma()) return avx2_ops_table();
#endif
  return nullptr;
}

bool avx2_available() { return avx2_ops() != nullptr; }

const Ops& active() { return *active_table(); }

Backend active_backend() {
  return active_table() == &scalar_ops() ? Backend::scalar : Backend::avx2;
}

void set_backend(Backend b) {
  if (b == Backend::scalar) {
    active_table() = &scalar_ops();
    return;
  }
  const Ops* t = avx2_ops();
  if (t == nullptr) {
    throw config_error("avx2 kernel backend not available on this CPU/build");
  }
  active_table() = t;
}

std::string backend_name(Backend b) {
  return b == Backend::scalar ? "scalar" : "avx2";
}

}  // namespace pdl::kernels
