// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crsam {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Test fixture: deliberately corrupt one component so the suite can be seen
/// to fail.
enum class Fault { none, gradient };

struct SelfcheckOptions {
  std::uint64_t seed = 0;
  Fault fault = Fault::none;
};

/// Finite-difference probes on 1000 random quadratics match v'(Aw+b) and v'Av
/// to 1e-8 relative.
CheckResult check_fd_exactness(std::uint64_t seed);
/// Analytic MLP gradients against central differences, 100 draws, 1e-4 relative.
CheckResult check_gradients(std::uint64_t seed, Fault fault = Fault::none);
/// Hutchinson: 100 trials x 1000 gaussian probes within 3 stderr of Tr(A) in
/// >= 99 trials; rademacher on A = I returns the dimension.
CheckResult check_hutchinson(std::uint64_t seed);
/// crsam_step with alpha = beta = 0 equals sam_step bit for bit; sam_step with
/// rho = 1e-12 matches sgd_step to 1e-8 relative displacement.
CheckResult check_reduction(std::uint64_t seed);
/// Regularizer gradient (probe direction frozen) against central differences
/// of the scalar regularizer, 100 MLP draws, 1e-4 relative.
CheckResult check_regularizer_gradient(std::uint64_t seed);
/// Loss scaled by c in {0.1, 10}: C(w) unchanged to 1e-10, trace scaled by c to 1e-6.
CheckResult check_scale_invariance(std::uint64_t seed);
/// Trust-region oracle against the one-step point and 1e6 sphere samples, 1000 instances.
CheckResult check_trust_region(std::uint64_t seed);

std::vector<CheckResult> run_selfcheck(const SelfcheckOptions& options);

}  // namespace crsam
