#pragma once

#include "ocm/errors.hpp"
#include "ocm/model.hpp"
#include "ocm/model_io.hpp"
#include "ocm/csv.hpp"
#include "ocm/qvi.hpp"
#include "ocm/solver.hpp"
#include "ocm/policy.hpp"
#include "ocm/bayes.hpp"
#include "ocm/sim.hpp"

namespace ocm {
inline constexpr const char* version = "0.1.0";
} // namespace ocm
