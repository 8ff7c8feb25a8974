#include "fedsim/record.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fedsim/errors.hpp"

namespace fedsim {
namespace {

constexpr const char* kColumns =
    "comm_round,cum_grad_evals,train_loss,train_acc,test_loss,test_acc,grad_norm2";

bool same_double(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return a == b && std::signbit(a) == std::signbit(b);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::TargetReached: return "target-reached";
  }
  return "completed";
}

RunStatus run_status_from_string(const std::string& s) {
  if (s == "completed") return RunStatus::Completed;
  if (s == "diverged") return RunStatus::Diverged;
  if (s == "target-reached") return RunStatus::TargetReached;
  throw ConfigError("unknown run status '" + s + "'");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("cannot parse number '" + s + "'");
  return v;
}

void write_record_csv(std::ostream& out, const RunRecord& rec) {
  out << "# algorithm: " << rec.algorithm << '\n';
  out << "# status: " << to_string(rec.status) << '\n';
  if (!rec.diagnostic.empty()) out << "# diagnostic: " << rec.diagnostic << '\n';
  for (const auto& [k, v] : rec.header) out << "# " << k << ": " << v << '\n';
  out << kColumns << '\n';
  for (const auto& r : rec.rows)
    out << r.comm_round << ',' << r.cum_grad_evals << ',' << format_double(r.train_loss) << ','
        << format_double(r.train_acc) << ',' << format_double(r.test_loss) << ','
        << format_double(r.test_acc) << ',' << format_double(r.grad_norm2) << '\n';
}

std::string record_to_csv(const RunRecord& rec) {
  std::ostringstream ss;
  write_record_csv(ss, rec);
  return ss.str();
}

RunRecord read_record_csv(std::istream& in) {
  RunRecord rec;
  std::string line;
  bool seen_columns = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ", 2);
      if (colon == std::string::npos) continue;
      const std::string key = line.substr(2, colon - 2);
      const std::string value = line.substr(colon + 2);
      if (key == "algorithm") rec.algorithm = value;
      else if (key == "status") rec.status = run_status_from_string(value);
      else if (key == "diagnostic") rec.diagnostic = value;
      else rec.header[key] = value;
      continue;
    }
    if (!seen_columns) {
      if (line != kColumns) throw ConfigError("record csv: unexpected column header");
      seen_columns = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 7) throw ConfigError("record csv: expected 7 fields");
    RunRow r;
    r.comm_round = std::stoull(f[0]);
    r.cum_grad_evals = std::stoull(f[1]);
    r.train_loss = parse_double(f[2]);
    r.train_acc = parse_double(f[3]);
    r.test_loss = parse_double(f[4]);
    r.test_acc = parse_double(f[5]);
    r.grad_norm2 = parse_double(f[6]);
    rec.rows.push_back(r);
  }
  return rec;
}

void write_record_jsonl(std::ostream& out, const RunRecord& rec) {
  for (const auto& r : rec.rows) {
    nlohmann::json j{{"comm_round", r.comm_round},
                     {"cum_grad_evals", r.cum_grad_evals},
                     {"train_loss", json_number(r.train_loss)},
                     {"train_acc", json_number(r.train_acc)},
                     {"test_loss", json_number(r.test_loss)},
                     {"test_acc", json_number(r.test_acc)},
                     {"grad_norm2", json_number(r.grad_norm2)}};
    out << j.dump() << '\n';
  }
  nlohmann::json tail{{"algorithm", rec.algorithm}, {"status", to_string(rec.status)}};
  if (!rec.diagnostic.empty()) tail["diagnostic"] = rec.diagnostic;
  out << tail.dump() << '\n';
}

bool same_rows(const RunRecord& a, const RunRecord& b) {
  if (a.algorithm != b.algorithm || a.status != b.status || a.diagnostic != b.diagnostic ||
      a.header != b.header || a.rows.size() != b.rows.size())
    return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const RunRow& x = a.rows[i];
    const RunRow& y = b.rows[i];
    if (x.comm_round != y.comm_round || x.cum_grad_evals != y.cum_grad_evals ||
        !same_double(x.train_loss, y.train_loss) || !same_double(x.train_acc, y.train_acc) ||
        !same_double(x.test_loss, y.test_loss) || !same_double(x.test_acc, y.test_acc) ||
        !same_double(x.grad_norm2, y.grad_norm2))
      return false;
  }
  return true;
}

}  // namespace fedsim
