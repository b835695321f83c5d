#include <cstdlib>
#include <string>

#include "hpanel/kernels.hpp"

namespace hpanel::kernels {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (isa == Isa::Avx2 && cpu_supports(Isa::Avx2)) return *avx2_table();
  return scalar_table();
}

namespace {

const KernelTable& select() {
  if (const char* env = std::getenv("HPANEL_KERNELS")) {
    if (std::string(env) == "scalar") return scalar_table();
  }
  return table(Isa::Avx2);
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& chosen = select();
  return chosen;
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

}  // namespace hpanel::kernels
