#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace elsa {

/// Per-round solver diagnostics; serialized as one JSON object per line.
struct RoundRecord {
  std::int64_t round = 0;
  std::int64_t inner_step = 0;
  double loss_x = 0.0;
  double loss_z = 0.0;
  double primal_residual_l2 = 0.0;
  double aug_lagrangian = 0.0;
  double sparsity_achieved = 0.0;
  double lam = 0.0;
  double lr = 0.0;
  double quant_err_u_linf = 0.0;
  double quant_err_z_linf = 0.0;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

/// JSON text of one record, reals with 17 significant digits, no trailing newline.
std::string to_json_line(const RoundRecord& r);
RoundRecord round_record_from_json(const std::string& line);

void write_jsonl(std::ostream& os, const std::vector<RoundRecord>& records);
void write_jsonl(const std::string& path, const std::vector<RoundRecord>& records);
std::vector<RoundRecord> read_jsonl(const std::string& path);

}  // namespace elsa
