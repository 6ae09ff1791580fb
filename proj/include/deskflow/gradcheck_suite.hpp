#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deskflow {

struct GradcheckRow {
  std::string op;
  int cases = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Finite-difference checks (double precision, central differences) of
/// conv2d, upconv2d, relu, concat, resize and correlation, each on `cases`
/// random shapes.
std::vector<GradcheckRow> run_gradcheck_suite(std::uint64_t seed = 1, int cases = 5, double eps = 1e-5,
                                              double tolerance = 1e-4);

/// Fixed-width table, one line per op plus an overall verdict.
std::string format_gradcheck_table(const std::vector<GradcheckRow>& rows);

}  // namespace deskflow
