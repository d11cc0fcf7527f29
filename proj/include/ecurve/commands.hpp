#ifndef ECURVE_COMMANDS_HPP_
#define ECURVE_COMMANDS_HPP_

#include <string>

#include "ecurve/config.hpp"

namespace ecurve {

// Estimation on a CSV dataset: writes results.json, a plot-data CSV and a
// weight-diagnostics CSV per estimator, plus per-unit influence CSVs when
// requested.
void run_estimate(const RunConfig& config);

// Simulation study driver: writes metrics.csv and coverage.csv.
void run_simulate(const RunConfig& config);

// Effect curve between two previous estimate runs (their output
// directories); both runs must have written influence vectors for the named
// estimator on the same dataset.
void run_contrast(const std::string& dir_a, const std::string& dir_b,
                  const std::string& estimator, double alpha, int draws, std::uint64_t seed,
                  const std::string& output_dir);

// Wide-to-long debug dump.
void run_convert(const RunConfig& config);

}  // namespace ecurve

#endif  // ECURVE_COMMANDS_HPP_
