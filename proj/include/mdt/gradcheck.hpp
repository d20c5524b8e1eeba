// Central finite-difference verification of every analytic gradient path:
// the parameterized layers, both loss terms, the interpolated/pooled feature
// extraction, and the full feature-to-loss training chain.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mdt {

struct GradCheckResult {
  std::string name;
  int instances = 0;
  double max_rel_err = 0;
  bool pass = false;
};

/// Runs every check with `instances` random instances each; an instance
/// compares the analytic directional derivative along a random direction
/// against a central difference with step h, plus per-coordinate spot checks.
/// Deterministic for a fixed seed.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed = 7, int instances = 20,
                                                double h = 1e-5, double tol = 1e-4);

/// Formats one line per check: name, instance count, worst relative error.
std::string format_gradient_report(const std::vector<GradCheckResult>& results);

}  // namespace mdt
