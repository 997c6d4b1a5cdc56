#pragma once

#include "truncnorm/diagnostics.hpp"
#include "truncnorm/errors.hpp"
#include "truncnorm/mvn_gibbs.hpp"
#include "truncnorm/numerics.hpp"
#include "truncnorm/univariate.hpp"

namespace truncnorm {
inline constexpr const char* kVersion = "0.1.0";
}
