#pragma once

// Serialization of experiment results: a CSV with the row table and a JSON
// sidecar with everything else (parameters, metrics, seed, tolerances, wall
// time, build id).  The CSV is byte-deterministic: fixed column order, %.17g
// formatting, LF line endings, and nothing time- or host-dependent in it.
// Volatile fields (wall time, build id) live only in the sidecar.

#include <string>

#include "oscint/experiments.hpp"
#include "oscint/quad.hpp"

namespace oscint {

// Round-trip decimal form of v (%.17g via snprintf, "nan"/"inf" normalized
// to lowercase).
std::string format_g17(double v);

// The exact CSV bytes for a result.  Single-series results get three named
// columns (param, value, err); multi-series results get a leading series
// column.
std::string csv_text(const ExperimentResult& r);

// "git describe --always --dirty" of the working tree, or "unknown" when
// git is unavailable.
std::string git_describe();

// Writes <dir>/<stem>.csv and <dir>/<stem>.meta.json; creates dir if needed.
// Returns the CSV path.  Throws std::runtime_error on I/O failure.
std::string write_experiment(const ExperimentResult& r, const QuadSpec& spec,
                             const std::string& dir, const std::string& stem);

}  // namespace oscint
