#include "etguard/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace etguard {

std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    const double zmax = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - zmax);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

Var cross_entropy_loss(Tape& t, Var logits, const std::vector<int>& labels) {
    if (labels.empty()) throw std::invalid_argument("cross_entropy_loss: empty batch");
    const int m = t.value(logits).rows();
    if (m != static_cast<int>(labels.size()))
        throw std::invalid_argument("cross_entropy_loss: label count mismatch");
    std::vector<double> weights(labels.size(), 1.0);
    return t.scale(t.softmax_xent_wsum(logits, labels, weights), 1.0 / m);
}

Var mean_row_sqdist(Tape& t, Var a, const NdArray& target) {
    const int m = t.value(a).rows();
    if (m == 0) throw std::invalid_argument("mean_row_sqdist: empty batch");
    return t.scale(t.mse_sum_rows(a, target), 1.0 / m);
}

} // namespace etguard
