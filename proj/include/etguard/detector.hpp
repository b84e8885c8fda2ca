#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etguard/param_store.hpp"
#include "etguard/rng.hpp"
#include "etguard/tape.hpp"

namespace etguard::detection {

struct DetectorConfig {
    int input_dim = 34;
    int hidden1 = 64;
    int hidden2 = 32;
    int classes = 2;

    void validate() const;
};

struct Prediction {
    std::vector<double> logits;
    std::vector<double> probabilities;
    int label = 0; // argmax; exact ties resolve to 0 (benign)
};

struct MetricsReport {
    int64_t tp = 0, fp = 0, tn = 0, fn = 0; // malicious = positive
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

class DetectorModel {
public:
    DetectorModel(DetectorConfig cfg, RngState& rng);
    DetectorModel(DetectorConfig cfg, ParamStore params);

    const DetectorConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Taped logits for a [n, input_dim] batch node.
    Var forward(Tape& t, Var x);

    Prediction predict(const std::vector<double>& x);
    std::vector<Prediction> predict_batch(const std::vector<std::vector<double>>& xs);

    // Rows -> [n, input_dim] matrix; validates widths.
    NdArray to_matrix(const std::vector<std::vector<double>>& xs) const;

private:
    DetectorConfig cfg_;
    ParamStore params_;
};

struct PretrainConfig {
    int epochs = 40;
    int batch_size = 64;
    double lr = 1e-3;
};

// Cross-entropy training from a fresh model state. Requires both classes to
// be present (metrics downstream are undefined otherwise). Returns the
// per-epoch mean loss.
std::vector<double> pretrain(DetectorModel& model, const std::vector<std::vector<double>>& xs,
                             const std::vector<int>& ys, const PretrainConfig& cfg,
                             RngState& rng);

MetricsReport compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth);

} // namespace etguard::detection
