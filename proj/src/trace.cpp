#include "otd/trace.hpp"

namespace otd {

TraceRow make_row(const StepOutcome& out, std::size_t query_size) {
  return {out.t, out.included, out.bound, query_size, out.statistic.log()};
}

std::string trace_header(bool with_method) {
  std::string h = "t,included,d,|S|,tdp_bound,log_statistic";
  return with_method ? "method," + h : h;
}

std::string trace_line(const TraceRow& row, const std::string& method) {
  std::string line;
  if (!method.empty()) line = method + ",";
  line += std::to_string(row.t) + "," + (row.included ? "1" : "0") + "," + std::to_string(row.d) + "," +
          std::to_string(row.query_size) + "," + format_double(row.tdp_bound()) + "," +
          format_double(row.log_statistic);
  return line;
}

void write_trace_csv(std::ostream& os, const BoundTrace& trace, const std::string& method) {
  os << trace_header(!method.empty()) << '\n';
  for (const auto& row : trace) os << trace_line(row, method) << '\n';
}

}  // namespace otd
