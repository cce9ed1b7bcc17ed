#include "elsa/records.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "elsa/format.hpp"

namespace elsa {

std::string to_json_line(const RoundRecord& r) {
  // Written by hand to pin the field order and the 17-digit real format.
  std::string s = "{";
  s += "\"round\":" + std::to_string(r.round);
  s += ",\"inner_step\":" + std::to_string(r.inner_step);
  s += ",\"loss_x\":" + format_real(r.loss_x);
  s += ",\"loss_z\":" + format_real(r.loss_z);
  s += ",\"primal_residual_l2\":" + format_real(r.primal_residual_l2);
  s += ",\"aug_lagrangian\":" + format_real(r.aug_lagrangian);
  s += ",\"sparsity_achieved\":" + format_real(r.sparsity_achieved);
  s += ",\"lam\":" + format_real(r.lam);
  s += ",\"lr\":" + format_real(r.lr);
  s += ",\"quant_err_u_linf\":" + format_real(r.quant_err_u_linf);
  s += ",\"quant_err_z_linf\":" + format_real(r.quant_err_z_linf);
  s += "}";
  return s;
}

RoundRecord round_record_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  auto real = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  RoundRecord r;
  r.round = j.at("round").get<std::int64_t>();
  r.inner_step = j.at("inner_step").get<std::int64_t>();
  r.loss_x = real("loss_x");
  r.loss_z = real("loss_z");
  r.primal_residual_l2 = real("primal_residual_l2");
  r.aug_lagrangian = real("aug_lagrangian");
  r.sparsity_achieved = real("sparsity_achieved");
  r.lam = real("lam");
  r.lr = real("lr");
  r.quant_err_u_linf = real("quant_err_u_linf");
  r.quant_err_z_linf = real("quant_err_z_linf");
  return r;
}

void write_jsonl(std::ostream& os, const std::vector<RoundRecord>& records) {
  for (const auto& r : records) os << to_json_line(r) << '\n';
}

void write_jsonl(const std::string& path, const std::vector<RoundRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_jsonl(os, records);
}

std::vector<RoundRecord> read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<RoundRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) out.push_back(round_record_from_json(line));
  }
  return out;
}

}  // namespace elsa
