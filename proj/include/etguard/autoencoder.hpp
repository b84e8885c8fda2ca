#pragma once

#include <string>
#include <utility>
#include <vector>

#include "etguard/ingest.hpp"
#include "etguard/layers.hpp"
#include "etguard/param_store.hpp"
#include "etguard/rng.hpp"
#include "etguard/tape.hpp"

namespace etguard::features {

struct AutoEncoderConfig {
    int head_packets = ingest::kHeadPackets;
    int num_buckets = ingest::kNumBuckets;
    int feature_dim = 32; // V; must equal 2 * layers * hidden
    int hidden = 8;       // H
    int layers = 2;       // B
    int recon_hidden = 32;

    // Throws std::invalid_argument on impossible dimensions.
    void validate() const;
};

// Sequence autoencoder: bucket embedding -> bi-GRU encoder -> feature vector
// (the concatenated final bidirectional states) -> bi-GRU decoder fed the
// broadcast feature at every step -> per-step perceptron scoring the bucket.
class AutoEncoderModel {
public:
    AutoEncoderModel(AutoEncoderConfig cfg, RngState& rng);
    AutoEncoderModel(AutoEncoderConfig cfg, ParamStore params);

    const AutoEncoderConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Taped forward over a batch of sequences; scores are per step
    // [batch, num_buckets].
    struct TapedForward {
        Var features;
        std::vector<Var> step_scores;
    };
    TapedForward forward(Tape& t, const std::vector<const ingest::NormalizedSequence*>& batch);

    // Masked mean cross-entropy between step scores and the true buckets.
    Var taped_reconstruction_loss(Tape& t, const TapedForward& fwd,
                                  const std::vector<const ingest::NormalizedSequence*>& batch);

    std::vector<double> encode(const ingest::NormalizedSequence& seq);
    NdArray reconstruct(const ingest::NormalizedSequence& seq); // [head_packets, num_buckets]

    // feature ++ (d_norm, t_m_norm), one row of feature_dim + 2 per sequence
    std::vector<std::vector<double>> extract_features(
        const std::vector<ingest::NormalizedSequence>& seqs);

private:
    AutoEncoderConfig cfg_;
    ParamStore params_;
};

// Mean cross-entropy of per-step scores against the sequence's buckets over
// valid (masked-in) steps only. Throws when no step is valid.
double reconstruction_loss(const NdArray& scores, const ingest::NormalizedSequence& seq);

// Initializes a model from `rng` and trains it with Adam; returns the model
// and the per-epoch mean training loss. Throws on an empty dataset, or when
// the loss goes non-finite.
std::pair<AutoEncoderModel, std::vector<double>> train_autoencoder(
    const AutoEncoderConfig& cfg, const std::vector<ingest::NormalizedSequence>& data, int epochs,
    int batch_size, double lr, RngState& rng);

} // namespace etguard::features
