#pragma once

#include <string>
#include <vector>

namespace mcgan {

// One named check inside a verification suite.
struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyCheck> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
  int64_t n_passed() const {
    int64_t n = 0;
    for (const auto& c : checks) n += c.passed;
    return n;
  }
};

// Finite-difference checks on every differentiable op plus the end-to-end
// reduced model (16x16, 4 stages), 64-bit, tolerance 1e-4 relative.
VerifyReport verify_gradients();

// Metric implementations against independent brute-force oracles (1000
// random 16x16 pairs, < 1e-9; AUC exact under a shared seed) and the hand
// arithmetic values.
VerifyReport verify_metrics();

// Memory invariants, 1000 random cases each: attention normalization,
// one-hot replacement, convex-combination bounds, slot-permutation
// equivariance.
VerifyReport verify_memory();

std::vector<VerifyReport> verify_all();

// Prints one line per check plus a suite summary; returns overall pass.
bool print_reports(const std::vector<VerifyReport>& reports);

}  // namespace mcgan
