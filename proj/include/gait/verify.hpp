#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gait/tensor.hpp"

namespace gait {

// Tolerance for central-difference gradient verification in 64-bit mode.
inline constexpr double kGradCheckTol = 1e-4;
inline constexpr double kGradCheckStep = 1e-5;

struct GradCheckCase {
    std::string name;
    GradCheckReport report;
};

// Finite-difference verification of every differentiable op plus the full
// network-and-loss composite, in double precision. Deterministic given seed.
std::vector<GradCheckCase> grad_check_suite(std::uint64_t seed);

}  // namespace gait
