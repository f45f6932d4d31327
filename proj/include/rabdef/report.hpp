#pragma once

#include <string>

#include "rabdef/sim.hpp"

namespace rabdef {

// Fixed-point decimal rendering used for every number the tool writes, so
// output bytes do not depend on locale or printf implementation.
std::string format_fixed(double value, int precision);

// Writes rounds.csv, weights.csv and fairness.csv into the directory,
// creating it if needed. Cells for absent values (no backdoor task, client
// not participating) are left empty. LF line endings.
void emit_reports(const ExperimentResult& result, int n_clients, const std::string& out_dir);

// Writes instance_<idx>.pgm input renderings plus one importance rendering
// per instance for the explained client, named
// explanation_round<R>_client<C>_instance_<idx>.pgm. The importance map shown
// is the one for the instance's true label.
void emit_explanation(const Explanation& explanation, const std::string& out_dir);

// Reads fairness.csv from the directory and lays it out as an aligned
// two-column text table.
std::string render_fairness_report(const std::string& in_dir);

}  // namespace rabdef
