#pragma once

#include <string>
#include <variant>
#include <vector>

#include "elsa/tensor.hpp"

namespace elsa {

/// Symmetric signed integer codes in [-levels, levels].
struct IntegerGrid {
  int levels = 127;
};

/// Emulated binary floating point with an implicit leading bit, round-to-nearest-even,
/// flush-to-zero below the smallest normal and saturation at the format's vmax.
struct FloatEmulated {
  int exp_bits = 4;
  int mantissa_bits = 3;
};

/// Pass-through grid used for the "none" format.
struct IdentityGrid {};

struct QuantFormat {
  std::string name;
  double vmax = 0.0;
  std::variant<IntegerGrid, FloatEmulated, IdentityGrid> grid;
  /// Whether a dynamic per-tensor scale s = max|z| / vmax is applied.
  bool scaled = true;

  static QuantFormat int8();
  static QuantFormat fp8e4m3();
  static QuantFormat bf16();
  static QuantFormat none();
  /// "int8", "fp8e4m3", "bf16" or "none".
  static QuantFormat from_name(const std::string& name);

  bool is_identity() const { return std::holds_alternative<IdentityGrid>(grid); }
  /// Nearest grid value to x (in code units).
  double round_to_grid(double x) const;
};

struct QuantizedTensor {
  std::vector<double> codes;
  /// s = max|z| / vmax for scaled formats, 1 otherwise; 0 only for an all-zero source.
  double scale = 0.0;
  /// max|z| of the source; dequantization multiplies by it before dividing by vmax.
  double absmax = 0.0;
  QuantFormat format;
  Shape shape;
};

QuantizedTensor quantize(const Tensor& z, const QuantFormat& fmt);
Tensor dequantize(const QuantizedTensor& q);

/// dequantize(quantize(z)).
Tensor quant_roundtrip(const Tensor& z, const QuantFormat& fmt);

struct QuantError {
  double linf = 0.0;
  double l2 = 0.0;
};

/// Norms of z - dequantize(quantize(z)).
QuantError quant_roundtrip_error(const Tensor& z, const QuantFormat& fmt);

}  // namespace elsa
