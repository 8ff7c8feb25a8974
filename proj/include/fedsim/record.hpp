#pragma once
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fedsim/param_vector.hpp"

namespace fedsim {

enum class RunStatus { Completed, Diverged, TargetReached };

std::string to_string(RunStatus s);
RunStatus run_status_from_string(const std::string& s);

struct RunRow {
  std::size_t comm_round = 0;
  std::size_t cum_grad_evals = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double grad_norm2 = 0.0;
};

struct RunRecord {
  std::string algorithm;
  RunStatus status = RunStatus::Completed;
  std::string diagnostic;
  std::vector<RunRow> rows;
  // Returned output iterate and the last synchronized iterate.
  ParamVector output;
  ParamVector last;
  // Free-form provenance (resolved config, seed, kernel backend).
  std::map<std::string, std::string> header;
};

// Field-exact text form: "# key: value" header lines, then
// comm_round,cum_grad_evals,train_loss,train_acc,test_loss,test_acc,grad_norm2
// with shortest round-trip float formatting. Output/last vectors are not serialized.
void write_record_csv(std::ostream& out, const RunRecord& rec);
RunRecord read_record_csv(std::istream& in);
std::string record_to_csv(const RunRecord& rec);

// JSON-lines form: one object per row plus a trailing status object.
void write_record_jsonl(std::ostream& out, const RunRecord& rec);

// Equality treating NaN == NaN, over everything the CSV carries.
bool same_rows(const RunRecord& a, const RunRecord& b);

std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace fedsim
