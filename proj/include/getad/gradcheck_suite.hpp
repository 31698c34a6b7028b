#pragma once

#include <string>
#include <vector>

#include "getad/gradcheck.hpp"

namespace getad {

struct NamedReport {
  std::string name;
  GradcheckReport report;
};

/// Finite-difference checks of every primitive and of composed encoder,
/// positional-embedding, decoder and full-model graphs at toy sizes.
std::vector<NamedReport> run_gradcheck_suite(std::uint64_t seed = 7, double eps = 1e-3,
                                             double tol = 1e-4);

}  // namespace getad
