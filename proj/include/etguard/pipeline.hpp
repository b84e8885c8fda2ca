#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "etguard/autoencoder.hpp"
#include "etguard/detector.hpp"
#include "etguard/incremental.hpp"
#include "etguard/ingest.hpp"
#include "etguard/replay_buffer.hpp"
#include "etguard/rng.hpp"

namespace etguard::pipeline {

struct PipelineConfig {
    // sequence window and extractor shape
    int head_packets = ingest::kHeadPackets;
    int num_buckets = ingest::kNumBuckets;
    int feature_dim = 32;
    int hidden = 8;
    int layers = 2;
    int recon_hidden = 32;
    // detector shape
    int det_hidden1 = 64;
    int det_hidden2 = 32;
    // training
    double lr = 1e-3;
    int64_t batch_size = 64;
    int64_t ae_epochs = 10;
    int64_t detector_epochs = 40;
    int64_t epochs_per_round = 25;
    // incremental learning
    double alpha = 0.5;
    double gamma = 10.0;
    int64_t buffer_capacity = 500;
    int64_t buffer_batch = 32;
    // run control
    uint64_t seed = 1;
    std::string mode = "etguard"; // etguard | etguard-v | full

    void validate() const;
    features::AutoEncoderConfig ae_config() const;
    detection::DetectorConfig det_config() const;
    incremental::LearnConfig learn_config() const;

    bool operator==(const PipelineConfig&) const = default;
};

// Flat key=value text, one field per line; '#' starts a comment.
PipelineConfig parse_config(std::istream& in);
PipelineConfig parse_config_text(const std::string& text);
std::string serialize_config(const PipelineConfig& cfg);

incremental::Mode learn_mode(const std::string& mode_name);

// One training or evaluation unit: the measured head window of a flow plus
// its label and attack-family tag (-1 for benign).
struct LabeledFlow {
    std::string key;
    int label = 0;
    int family = -1;
    ingest::RawSequence raw;
};

// One JSON object per line: key, label, family, lengths, duration, mean_gap.
void write_flows(std::ostream& out, const std::vector<LabeledFlow>& flows);
std::vector<LabeledFlow> read_flows(std::istream& in);

std::vector<ingest::NormalizedSequence> normalize_flows(const std::vector<LabeledFlow>& flows);

// ---- synthetic data ----

struct LengthComponent {
    double weight = 1.0;
    double mean = 500.0;
    double sd = 100.0;
};

struct FamilySpec {
    std::string name;
    int label = 0;
    int family = -1;
    int64_t flows = 0;        // count used by the synth command
    double packet_mean = 10.0; // mean packets per flow, > 1
    double gap_mean = 0.1;     // mean inter-arrival seconds
    std::vector<LengthComponent> length_mix;

    void validate() const;
};

// Draws `count` flows: packet count 1 + geometric, lengths from the Gaussian
// mixture rounded and clamped to [0, 1514], inter-arrivals exponential. The
// flow then goes through the same head-window measurement as ingested
// traffic.
std::vector<LabeledFlow> synth_family(const FamilySpec& fam, int64_t count, RngState& rng);

struct RoundPlan {
    std::vector<std::pair<std::string, int64_t>> train;
    std::vector<std::pair<std::string, int64_t>> test;
};

struct RoundSpecFile {
    std::vector<FamilySpec> families;
    std::vector<RoundPlan> rounds;

    const FamilySpec& family(const std::string& name) const;
};

RoundSpecFile parse_round_spec(const std::string& json_text);

struct RoundDataset {
    std::vector<std::vector<LabeledFlow>> train;
    std::vector<std::vector<LabeledFlow>> test;
};

RoundDataset build_round_dataset(const RoundSpecFile& spec, RngState& rng);

// ---- trained pipeline state ----

struct PipelineState {
    PipelineConfig cfg;
    features::AutoEncoderModel extractor;
    detection::DetectorModel detector;
    replay::ReplayBuffer buffer;
    RngState rng;
};

struct PretrainReport {
    std::vector<double> ae_curve;
    std::vector<double> det_curve;
};

// Round-0 training: fits the autoencoder on all flows, freezes it, trains the
// detector, then streams every sample through the reservoir with its
// post-training logits.
std::pair<PipelineState, PretrainReport> pretrain_pipeline(const PipelineConfig& cfg,
                                                           const std::vector<LabeledFlow>& flows);

// One incremental round in the configured mode. "full" reinitializes the
// detector and expects `flows` to already be the union of everything seen.
std::vector<incremental::StepLog> update_pipeline(PipelineState& state,
                                                  const std::vector<LabeledFlow>& flows);

std::vector<detection::Prediction> predict_flows(PipelineState& state,
                                                 const std::vector<LabeledFlow>& flows);
detection::MetricsReport evaluate_flows(PipelineState& state,
                                        const std::vector<LabeledFlow>& flows);

// ---- persistence ----

inline constexpr uint64_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& out, const PipelineState& state);
PipelineState load_checkpoint(std::istream& in);
void save_checkpoint_file(const std::string& path, const PipelineState& state);
PipelineState load_checkpoint_file(const std::string& path);

PipelineState clone_state(const PipelineState& state);

// ---- cumulative-round evaluation ----

struct EvalRow {
    std::string mode;
    int64_t round = 0;
    std::string scope; // "cumulative", "benign", or "family:N"
    int64_t count = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct TaggedStepLog {
    std::string mode;
    int64_t round = 0;
    incremental::StepLog log;
};

struct EvalRoundsResult {
    std::vector<EvalRow> rows;
    std::vector<TaggedStepLog> steps;
};

// Pretrains on round 0, updates through the remaining rounds, and evaluates
// each round on the cumulative test set plus per-family scopes, once per
// requested mode. Rejects any test flow tagged with a family newer than its
// round.
EvalRoundsResult eval_rounds(const PipelineConfig& cfg, const RoundDataset& data,
                             const std::vector<std::string>& modes);

std::string eval_report_csv(const std::vector<EvalRow>& rows);
std::string tagged_step_csv(const std::vector<TaggedStepLog>& steps);

// ---- extraction command core ----

struct ExtractSummary {
    int64_t flows = 0;
    int64_t packets = 0;
    int64_t skipped = 0;
    int64_t other_protocol = 0;
    int64_t fragments = 0;
    int64_t truncated = 0;
};

// Reads a packet log, assembles flows, and writes one JSON record per flow
// with the raw and normalized sequence forms.
ExtractSummary cmd_extract(std::istream& in, ingest::LogFormat format, std::ostream& out);

} // namespace etguard::pipeline
