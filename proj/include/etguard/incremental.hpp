#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etguard/detector.hpp"
#include "etguard/replay_buffer.hpp"
#include "etguard/rng.hpp"
#include "etguard/tape.hpp"

namespace etguard::incremental {

// How a training round combines the three loss terms.
enum class Mode {
    kFullLoss,      // cross entropy + distillation + balanced buffer replay
    kFinetuneOnly,  // cross entropy on new data only; buffer kept current but unused
    kJoint,         // cross entropy on a caller-assembled union dataset; buffer untouched
};

std::string mode_name(Mode mode);

struct LearnConfig {
    double alpha = 0.5;
    double gamma = 10.0;
    double lr = 1e-3;
    int64_t batch_size = 64;
    int64_t epochs_per_round = 25;
    int64_t buffer_batch = 32;
    Mode mode = Mode::kFullLoss;

    void validate() const;
};

// One optimizer step's loss terms. Invariant: total == l_ce + l_il + k * l_lb,
// where l_lb already carries the alpha scaling applied to the replayed batch.
struct LossBreakdown {
    double l_ce = 0.0;
    double l_il = 0.0;
    double l_lb = 0.0;
    double k = 1.0;
    double total = 0.0;
};

struct StepLog {
    int64_t epoch = 0;
    int64_t step = 0;
    LossBreakdown loss;
};

// KL divergence between two strictly positive distributions on the same support.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

struct Theorem1Result {
    double kl = 0.0;
    double weighted_euclid = 0.0;
    double residual = 0.0;
};

// Second-order expansion of KL(p || p + eps*delta) for a zero-sum perturbation.
// weighted_euclid is (eps^2 / 2) * sum_i delta_i^2 / p_i; residual is the gap
// between the exact divergence and that quadratic term.
Theorem1Result theorem1_residual(const std::vector<double>& p,
                                 const std::vector<double>& delta, double eps);

// k = 0.5 + sigmoid(gamma * l_il), always inside (0.5, 1.5).
double balance_coefficient(double l_il, double gamma);

// alpha * mean squared distance between the stored logits of batch entries and
// the detector's current logits for the same inputs. Empty batch contributes 0.
Var distillation_loss(Tape& t, detection::DetectorModel& det,
                      const std::vector<replay::BufferEntry>& batch, double alpha);

// Plain mean cross entropy of the detector on a replayed batch, no scaling.
// Empty batch contributes 0.
Var buffer_ce_loss(Tape& t, detection::DetectorModel& det,
                   const std::vector<replay::BufferEntry>& batch);

// Assembles the logged terms from already-reduced scalars.
LossBreakdown compose_breakdown(double l_ce, double l_il, double raw_buffer_ce,
                                const LearnConfig& cfg);

struct TotalLoss {
    Var loss;  // differentiable objective on the caller's tape
    LossBreakdown breakdown;
};

// Builds the round objective for one minibatch. batch1 feeds distillation,
// batch2 feeds the balanced replay term; both are ignored outside kFullLoss.
// k is read off the current distillation value and enters the objective as a
// constant factor. Passing fixed_k pins it instead (finite-difference probes
// must hold k at the base point to measure the same objective the optimizer
// steps on).
TotalLoss total_loss(Tape& t, detection::DetectorModel& det,
                     const std::vector<std::vector<double>>& xs,
                     const std::vector<int>& ys,
                     const std::vector<replay::BufferEntry>& batch1,
                     const std::vector<replay::BufferEntry>& batch2,
                     const LearnConfig& cfg, const double* fixed_k = nullptr);

// Runs one incremental round over labeled feature rows: for every epoch the
// rows are reshuffled, and each minibatch does sample -> loss -> backward ->
// optimizer step, then offers its rows (with post-step logits) to the buffer.
// kJoint trains on xs/ys as given and leaves the buffer alone entirely.
// Returns one log row per optimizer step.
std::vector<StepLog> incremental_round(detection::DetectorModel& det,
                                       replay::ReplayBuffer& buffer,
                                       const std::vector<std::vector<double>>& xs,
                                       const std::vector<int>& ys,
                                       const LearnConfig& cfg, RngState& rng);

// Serializes step logs as CSV with header epoch,step,l_ce,l_il,l_lb,k,total.
std::string step_log_csv(const std::vector<StepLog>& log);

}  // namespace etguard::incremental
