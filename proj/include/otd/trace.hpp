#pragma once

// Per-step bound records and their CSV form.

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "otd/guard.hpp"
#include "otd/numerics.hpp"

namespace otd {

struct TraceRow {
  std::size_t t = 0;
  bool included = false;
  std::size_t d = 0;
  std::size_t query_size = 0;
  double log_statistic = 0.0;

  /// d / |S|, with 0/0 taken as 0.
  double tdp_bound() const {
    return query_size == 0 ? 0.0 : static_cast<double>(d) / static_cast<double>(query_size);
  }

  bool operator==(const TraceRow&) const = default;
};

using BoundTrace = std::vector<TraceRow>;

/// Builds a row from a step outcome and the query-set size after the step.
TraceRow make_row(const StepOutcome& out, std::size_t query_size);

/// "t,included,d,|S|,tdp_bound,log_statistic", optionally prefixed by "method,".
std::string trace_header(bool with_method = false);
std::string trace_line(const TraceRow& row, const std::string& method = {});

void write_trace_csv(std::ostream& os, const BoundTrace& trace, const std::string& method = {});

}  // namespace otd
