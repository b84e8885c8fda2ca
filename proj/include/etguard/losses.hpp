#pragma once

#include <vector>

#include "etguard/ndarray.hpp"
#include "etguard/tape.hpp"

namespace etguard {

// Numerically stabilized softmax of one logit vector.
std::vector<double> softmax(const std::vector<double>& logits);

// Mean cross-entropy of softmax(logits) against integer labels. Throws on an
// empty batch.
Var cross_entropy_loss(Tape& t, Var logits, const std::vector<int>& labels);

// Mean over rows of the squared euclidean distance to a constant target.
Var mean_row_sqdist(Tape& t, Var a, const NdArray& target);

} // namespace etguard
