#pragma once

#include <cstdint>
#include <stdexcept>

namespace bsccs {

using index_t = std::int32_t;

/// Bad user input: malformed files, invalid records, inconsistent options.
class input_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numeric failure during a fit: overflow of the linear predictor, or an
/// undefined Newton step on a flat direction with no prior.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No usable estimate was produced (for example, every bootstrap replicate
/// hit the cycle cap).  Reported separately so callers can distinguish
/// "did not settle" from "broke".
class convergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Broken internal invariant.  Indicates a bug, not bad input.
class internal_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class Precision { Single, Double };

} // namespace bsccs
