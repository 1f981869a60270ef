#pragma once

#include <cmath>
#include <cstdint>

namespace difftv {

// Counter-based random streams. A stream is keyed by (seed, tag, index);
// every draw is a pure function of (key, counter), so sample sets never
// depend on thread count or evaluation order.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class StreamTag : std::uint64_t {
  Forward = 0x11,
  Reverse = 0x22,
  Oracle = 0x33,
};

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, StreamTag tag, std::uint64_t index)
      : key_(mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(tag)) ^ index)) {}

  // uniform on (0,1), open at both ends
  double uniform(std::uint64_t counter) const {
    const std::uint64_t r = mix64(key_ ^ mix64(counter));
    return static_cast<double>(r >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double normal(std::uint64_t counter) const { return inverse_normal_cdf(uniform(counter)); }

  // Wichura's AS 241 (PPND16): double-precision inverse of the standard
  // normal CDF, accurate to ~1e-16 relative over (0,1).
  static double inverse_normal_cdf(double p) {
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
      r = 0.180625 - q * q;
      return q *
             (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                   6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
               1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
             (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                   3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
               4.2313330701600911252e1) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double v;
    if (r <= 5.0) {
      r -= 1.6;
      v = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
    } else {
      r -= 5.0;
      v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -v : v;
  }

 private:
  std::uint64_t key_;
};

}  // namespace difftv
