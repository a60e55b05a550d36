#include "oscint/dyadic.hpp"

#include <stdexcept>

#include "oscint/rng.hpp"

namespace oscint {

double partition_check(int p_max, int sample_n) {
  if (p_max < 1) throw std::invalid_argument("partition_check: p_max < 1");
  if (sample_n < 1) throw std::invalid_argument("partition_check: sample_n < 1");
  double lo = static_cast<double>(1 - p_max);
  double hi = static_cast<double>(p_max - 1);
  Rng rng(0x9e3779b9u);
  double worst = 0.0;
  for (int i = 0; i < sample_n; ++i) {
    double e = rng.next_uniform(lo, hi);
    double s = std::exp2(e) * rng.next_sign();
    double sum = 0.0;
    for (int p = -p_max; p <= p_max; ++p) sum += phi_cut(std::ldexp(s, -p));
    double dev = std::fabs(sum - 1.0);
    if (dev > worst) worst = dev;
  }
  return worst;
}

}  // namespace oscint
