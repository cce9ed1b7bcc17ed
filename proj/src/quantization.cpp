#include "elsa/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace elsa {

QuantFormat QuantFormat::int8() { return {"int8", 127.0, IntegerGrid{127}, true}; }

QuantFormat QuantFormat::fp8e4m3() { return {"fp8e4m3", 448.0, FloatEmulated{4, 3}, true}; }

QuantFormat QuantFormat::bf16() {
  // 8 exponent bits, 7 stored mantissa bits (8 significant bits).
  return {"bf16", std::ldexp(2.0 - std::ldexp(1.0, -7), 127), FloatEmulated{8, 7}, false};
}

QuantFormat QuantFormat::none() { return {"none", 0.0, IdentityGrid{}, false}; }

QuantFormat QuantFormat::from_name(const std::string& name) {
  if (name == "int8") return int8();
  if (name == "fp8e4m3") return fp8e4m3();
  if (name == "bf16") return bf16();
  if (name == "none") return none();
  throw std::invalid_argument("unknown quantization format '" + name + "'");
}

namespace {

double round_float(double x, const FloatEmulated& f, double vmax) {
  if (x == 0.0) return 0.0;
  const double a = std::abs(x);
  int exp = 0;
  const double frac = std::frexp(a, &exp);  // a = frac * 2^exp, frac in [0.5, 1)
  // nearbyint honours the default round-to-nearest-even mode.
  double q = std::ldexp(std::nearbyint(std::ldexp(frac, f.mantissa_bits + 1)), exp - f.mantissa_bits - 1);
  const int bias = (1 << (f.exp_bits - 1)) - 1;
  const double min_normal = std::ldexp(1.0, 1 - bias);
  if (q < min_normal) q = 0.0;
  q = std::min(q, vmax);
  return std::copysign(q, x);
}

}  // namespace

double QuantFormat::round_to_grid(double x) const {
  return std::visit(
      [&](const auto& g) -> double {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, IntegerGrid>) {
          const double lv = g.levels;
          return std::clamp(std::round(x), -lv, lv);  // half away from zero
        } else if constexpr (std::is_same_v<G, FloatEmulated>) {
          return round_float(x, g, vmax);
        } else {
          return x;
        }
      },
      grid);
}

QuantizedTensor quantize(const Tensor& z, const QuantFormat& fmt) {
  if (!z.all_finite()) throw std::invalid_argument("quantize: non-finite input");
  QuantizedTensor q;
  q.format = fmt;
  q.shape = z.shape();
  q.codes.resize(z.size());
  for (double v : z.values()) q.absmax = std::max(q.absmax, std::abs(v));

  if (!fmt.scaled) {
    q.scale = 1.0;
    for (std::size_t i = 0; i < z.size(); ++i) q.codes[i] = fmt.round_to_grid(z[i]);
    return q;
  }
  if (q.absmax == 0.0) {
    q.scale = 0.0;
    return q;  // codes already zero
  }
  q.scale = q.absmax / fmt.vmax;
  for (std::size_t i = 0; i < z.size(); ++i) q.codes[i] = fmt.round_to_grid(z[i] * fmt.vmax / q.absmax);
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  Tensor out(q.shape);
  if (!q.format.scaled) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = q.codes[i];
    return out;
  }
  if (q.scale == 0.0) return out;
  // Equal to s * code; this association keeps the max-magnitude entry exact.
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = q.codes[i] * q.absmax / q.format.vmax;
  return out;
}

Tensor quant_roundtrip(const Tensor& z, const QuantFormat& fmt) {
  if (fmt.is_identity()) return z;
  return dequantize(quantize(z, fmt));
}

QuantError quant_roundtrip_error(const Tensor& z, const QuantFormat& fmt) {
  const Norms n = norms(z - quant_roundtrip(z, fmt));
  return {n.linf, n.l2};
}

}  // namespace elsa
