#pragma once

#include "rabdef/attack.hpp"
#include "rabdef/data.hpp"
#include "rabdef/model.hpp"

namespace rabdef {

// Fraction of samples whose argmax prediction matches the label; probability
// ties resolve to the lowest class index.
double evaluate(const ParamVector& params, const Dataset& data);

// Accuracy of the backdoor task: every sample not already carrying the target
// label gets the pattern stamped and relabeled, and the score is the fraction
// of those predicted as the target.
double evaluate_backdoor(const ParamVector& params, const Dataset& data,
                         const BackdoorPattern& pattern);

}  // namespace rabdef
