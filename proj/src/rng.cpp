#include "mtgpk/rng.hpp"

#include <cmath>

namespace mtgpk {

namespace {

// 128-layer ziggurat for the standard normal (Marsaglia & Tsang layout).
// One u64 feeds sign (1 bit), layer index (7 bits) and a 51-bit magnitude;
// the fast path costs a compare and a multiply. Tables are built once from
// the canonical layer constants.
struct ZigguratTables {
  static constexpr int kLayers = 128;
  static constexpr double kR = 3.442619855899;        // right edge of layer 127
  static constexpr double kV = 9.91256303526217e-3;   // area per layer
  static constexpr double kScale = 1.0 / 2251799813685248.0;  // 2^-51

  std::uint64_t kn[kLayers];
  double wn[kLayers];
  double fn[kLayers];

  ZigguratTables() {
    const double m = 2251799813685248.0;  // 2^51
    double dn = kR, tn = kR;
    const double q = kV / std::exp(-0.5 * kR * kR);
    kn[0] = static_cast<std::uint64_t>((kR / q) * m);
    kn[1] = 0;
    wn[0] = q / m;
    wn[kLayers - 1] = kR / m;
    fn[0] = 1.0;
    fn[kLayers - 1] = std::exp(-0.5 * kR * kR);
    for (int i = kLayers - 2; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(kV / dn + std::exp(-0.5 * dn * dn)));
      kn[i + 1] = static_cast<std::uint64_t>((dn / tn) * m);
      tn = dn;
      fn[i] = std::exp(-0.5 * dn * dn);
      wn[i] = dn / m;
    }
  }
};

const ZigguratTables& tables() {
  static const ZigguratTables t;
  return t;
}

}  // namespace

double Rng::normal_slow_path(std::uint64_t u) {
  const ZigguratTables& z = tables();
  for (;;) {
    const int iz = static_cast<int>(u & 127);
    const bool negative = (u >> 7) & 1;
    const std::uint64_t rabs = (u >> 8) & ((1ULL << 51) - 1);
    const double x = static_cast<double>(rabs) * z.wn[iz];
    if (rabs < z.kn[iz]) return negative ? -x : x;
    if (iz == 0) {
      // Tail beyond R: standard exponential rejection.
      double xx, yy;
      do {
        xx = -std::log(uniform_open()) / ZigguratTables::kR;
        yy = -std::log(uniform_open());
      } while (yy + yy < xx * xx);
      return negative ? -(ZigguratTables::kR + xx) : (ZigguratTables::kR + xx);
    }
    // Wedge between the layer edges.
    if (z.fn[iz] + uniform() * (z.fn[iz - 1] - z.fn[iz]) <
        std::exp(-0.5 * x * x))
      return negative ? -x : x;
    u = next_u64();
  }
}

void Rng::fill_normal(double* out, Eigen::Index n) {
  const ZigguratTables& z = tables();
  const std::uint64_t* __restrict kn = z.kn;
  const double* __restrict wn = z.wn;
  constexpr Eigen::Index kBatch = 1024;
  std::uint64_t ubuf[kBatch];
  Eigen::Index produced = 0;
  while (produced < n) {
    const Eigen::Index m = std::min<Eigen::Index>(kBatch, n - produced);
    // Generating first and transforming second keeps the generator's serial
    // dependency chain out of the table-lookup loop, which then pipelines.
    std::uint64_t s0 = state_[0], s1 = state_[1], s2 = state_[2], s3 = state_[3];
    for (Eigen::Index j = 0; j < m; ++j) {
      const std::uint64_t result = rotl(s0 + s3, 23) + s0;
      const std::uint64_t t = s1 << 17;
      s2 ^= s0;
      s3 ^= s1;
      s1 ^= s2;
      s0 ^= s3;
      s2 ^= t;
      s3 = rotl(s3, 45);
      ubuf[j] = result;
    }
    state_[0] = s0;
    state_[1] = s1;
    state_[2] = s2;
    state_[3] = s3;
    double* __restrict o = out + produced;
    for (Eigen::Index j = 0; j < m; ++j) {
      const std::uint64_t u = ubuf[j];
      const int iz = static_cast<int>(u & 127);
      const std::uint64_t rabs = (u >> 8) & ((1ULL << 51) - 1);
      if (rabs < kn[iz]) [[likely]] {
        const double x = static_cast<double>(rabs) * wn[iz];
        o[j] = (u >> 7) & 1 ? -x : x;
      } else {
        o[j] = normal_slow_path(u);
      }
    }
    produced += m;
  }
}

}  // namespace mtgpk
