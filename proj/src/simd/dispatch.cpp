#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "qrproxy/model.hpp"
#include "qrproxy/simd/kernels.hpp"

namespace qrproxy::simd {

namespace {

Level detect() {
  if (const char* env = std::getenv("QRPROXY_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Level::Scalar;
    if (want == "avx2" && avx2_supported()) return Level::Avx2;
  }
  return avx2_supported() ? Level::Avx2 : Level::Scalar;
}

std::atomic<int>& level_slot() {
  static std::atomic<int> slot{static_cast<int>(detect())};
  return slot;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
#else
  return false;
#endif
}

Level active_level() { return static_cast<Level>(level_slot().load(std::memory_order_relaxed)); }

void set_level(Level level) {
  if (level == Level::Avx2 && !avx2_supported()) throw Error("AVX2 not supported on this CPU");
  level_slot().store(static_cast<int>(level), std::memory_order_relaxed);
}

std::string_view level_name(Level level) { return level == Level::Avx2 ? "avx2" : "scalar"; }

#define QRPROXY_DISPATCH(call) \
  (active_level() == Level::Avx2 ? avx2::call : scalar::call)

double check_loss_sum(std::span<const double> r, double p) {
  return QRPROXY_DISPATCH(check_loss_sum(r, p));
}

void check_loss(std::span<const double> r, double p, std::span<double> out) {
  QRPROXY_DISPATCH(check_loss(r, p, out));
}

double sq_diff_sum(std::span<const double> a, std::span<const double> b) {
  return QRPROXY_DISPATCH(sq_diff_sum(a, b));
}

void ncs_eval(const NcsView& s, std::span<const std::int32_t> idx, std::span<const double> x,
              std::span<double> out) {
  QRPROXY_DISPATCH(ncs_eval(s, idx, x, out));
}

void tpow_eval(const TpowView& s, std::span<const double> x, std::span<double> out) {
  QRPROXY_DISPATCH(tpow_eval(s, x, out));
}

void gauss_logratio_acc(std::span<const double> w, std::span<const double> mean_new,
                        std::span<const double> mean_old, double inv_two_var,
                        std::span<double> acc) {
  QRPROXY_DISPATCH(gauss_logratio_acc(w, mean_new, mean_old, inv_two_var, acc));
}

#undef QRPROXY_DISPATCH

}  // namespace qrproxy::simd
