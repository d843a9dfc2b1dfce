#pragma once

// Umbrella header; each piece can also be included on its own.

#include "bench.hpp"            // IWYU pragma: export
#include "bootstrap.hpp"        // IWYU pragma: export
#include "common.hpp"           // IWYU pragma: export
#include "cross_validation.hpp" // IWYU pragma: export
#include "dataset.hpp"          // IWYU pragma: export
#include "engine.hpp"           // IWYU pragma: export
#include "ingest.hpp"           // IWYU pragma: export
#include "io.hpp"               // IWYU pragma: export
#include "manifest.hpp"         // IWYU pragma: export
#include "oracle.hpp"           // IWYU pragma: export
#include "prior.hpp"            // IWYU pragma: export
#include "rng.hpp"              // IWYU pragma: export
#include "simulate.hpp"         // IWYU pragma: export
#include "solver.hpp"           // IWYU pragma: export
#include "thread_pool.hpp"      // IWYU pragma: export
