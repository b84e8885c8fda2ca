#include "etguard/incremental.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "etguard/losses.hpp"

namespace etguard::incremental {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_distribution(const std::vector<double>& p, const char* what) {
    if (p.empty()) {
        throw std::invalid_argument(std::string(what) + ": empty distribution");
    }
    double sum = 0.0;
    for (double v : p) {
        if (!(v > 0.0)) {
            throw std::invalid_argument(std::string(what) + ": entries must be strictly positive");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument(std::string(what) + ": entries must sum to 1");
    }
}

} // namespace

std::string mode_name(Mode mode) {
    switch (mode) {
    case Mode::kFullLoss: return "full_loss";
    case Mode::kFinetuneOnly: return "finetune_only";
    case Mode::kJoint: return "joint";
    }
    throw std::invalid_argument("mode_name: unknown mode");
}

void LearnConfig::validate() const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("LearnConfig: alpha must be >= 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("LearnConfig: gamma must be > 0");
    if (!(lr > 0.0)) throw std::invalid_argument("LearnConfig: lr must be > 0");
    if (batch_size < 1) throw std::invalid_argument("LearnConfig: batch_size must be >= 1");
    if (epochs_per_round < 1) throw std::invalid_argument("LearnConfig: epochs_per_round must be >= 1");
    if (buffer_batch < 1) throw std::invalid_argument("LearnConfig: buffer_batch must be >= 1");
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) {
        throw std::invalid_argument("kl_divergence: size mismatch");
    }
    check_distribution(p, "kl_divergence");
    check_distribution(q, "kl_divergence");
    double kl = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

Theorem1Result theorem1_residual(const std::vector<double>& p,
                                 const std::vector<double>& delta, double eps) {
    if (p.size() != delta.size()) {
        throw std::invalid_argument("theorem1_residual: size mismatch");
    }
    check_distribution(p, "theorem1_residual");
    double dsum = 0.0;
    for (double d : delta) dsum += d;
    if (std::abs(dsum) > 1e-9) {
        throw std::invalid_argument("theorem1_residual: perturbation must sum to 0");
    }
    std::vector<double> q(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        q[i] = p[i] + eps * delta[i];
        if (!(q[i] > 0.0)) {
            throw std::invalid_argument("theorem1_residual: perturbation leaves the simplex");
        }
    }
    Theorem1Result r;
    r.kl = kl_divergence(p, q);
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        acc += delta[i] * delta[i] / p[i];
    }
    r.weighted_euclid = 0.5 * eps * eps * acc;
    r.residual = r.kl - r.weighted_euclid;
    return r;
}

double balance_coefficient(double l_il, double gamma) {
    // The sigmoid rounds to 1.0 once gamma*l_il passes ~37; cap the sum so k
    // stays strictly inside (0.5, 1.5) even then.
    const double k = 0.5 + stable_sigmoid(gamma * l_il);
    return std::min(k, std::nextafter(1.5, 0.0));
}

Var distillation_loss(Tape& t, detection::DetectorModel& det,
                      const std::vector<replay::BufferEntry>& batch, double alpha) {
    if (batch.empty()) {
        return t.constant(NdArray::scalar(0.0));
    }
    const int m = static_cast<int>(batch.size());
    const int classes = det.config().classes;
    std::vector<std::vector<double>> xs;
    xs.reserve(batch.size());
    NdArray targets(std::vector<int>{m, classes});
    for (int i = 0; i < m; ++i) {
        const auto& e = batch[static_cast<size_t>(i)];
        if (static_cast<int>(e.z.size()) != classes) {
            throw std::invalid_argument("distillation_loss: stored logits width mismatch");
        }
        xs.push_back(e.x);
        for (int c = 0; c < classes; ++c) {
            targets.at(i, c) = e.z[static_cast<size_t>(c)];
        }
    }
    Var logits = det.forward(t, t.constant(det.to_matrix(xs)));
    return t.scale(mean_row_sqdist(t, logits, targets), alpha);
}

Var buffer_ce_loss(Tape& t, detection::DetectorModel& det,
                   const std::vector<replay::BufferEntry>& batch) {
    if (batch.empty()) {
        return t.constant(NdArray::scalar(0.0));
    }
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    xs.reserve(batch.size());
    ys.reserve(batch.size());
    for (const auto& e : batch) {
        xs.push_back(e.x);
        ys.push_back(e.y);
    }
    Var logits = det.forward(t, t.constant(det.to_matrix(xs)));
    return cross_entropy_loss(t, logits, ys);
}

LossBreakdown compose_breakdown(double l_ce, double l_il, double raw_buffer_ce,
                                const LearnConfig& cfg) {
    LossBreakdown b;
    b.l_ce = l_ce;
    if (cfg.mode == Mode::kFullLoss) {
        b.l_il = l_il;
        b.l_lb = cfg.alpha * raw_buffer_ce;
        b.k = balance_coefficient(l_il, cfg.gamma);
    } else {
        b.l_il = 0.0;
        b.l_lb = 0.0;
        b.k = 1.0;
    }
    b.total = b.l_ce + b.l_il + b.k * b.l_lb;
    return b;
}

TotalLoss total_loss(Tape& t, detection::DetectorModel& det,
                     const std::vector<std::vector<double>>& xs,
                     const std::vector<int>& ys,
                     const std::vector<replay::BufferEntry>& batch1,
                     const std::vector<replay::BufferEntry>& batch2,
                     const LearnConfig& cfg, const double* fixed_k) {
    cfg.validate();
    if (xs.empty()) {
        throw std::invalid_argument("total_loss: empty minibatch");
    }
    Var l_ce = cross_entropy_loss(t, det.forward(t, t.constant(det.to_matrix(xs))), ys);

    TotalLoss out{l_ce, {}};
    out.breakdown.l_ce = t.value(l_ce)[0];

    if (cfg.mode != Mode::kFullLoss) {
        out.breakdown.total = out.breakdown.l_ce;
        return out;
    }

    Var total = l_ce;
    if (!batch1.empty()) {
        Var l_il = distillation_loss(t, det, batch1, cfg.alpha);
        out.breakdown.l_il = t.value(l_il)[0];
        total = t.add(total, l_il);
    }
    out.breakdown.k = fixed_k ? *fixed_k
                              : balance_coefficient(out.breakdown.l_il, cfg.gamma);
    if (!batch2.empty()) {
        Var l_lb = t.scale(buffer_ce_loss(t, det, batch2), cfg.alpha);
        out.breakdown.l_lb = t.value(l_lb)[0];
        total = t.add(total, t.scale(l_lb, out.breakdown.k));
    }
    out.loss = total;
    out.breakdown.total = t.value(total)[0];
    return out;
}

std::vector<StepLog> incremental_round(detection::DetectorModel& det,
                                       replay::ReplayBuffer& buffer,
                                       const std::vector<std::vector<double>>& xs,
                                       const std::vector<int>& ys,
                                       const LearnConfig& cfg, RngState& rng) {
    cfg.validate();
    if (xs.empty()) {
        throw std::invalid_argument("incremental_round: no training data");
    }
    if (xs.size() != ys.size()) {
        throw std::invalid_argument("incremental_round: feature/label count mismatch");
    }
    for (int y : ys) {
        if (y != 0 && y != 1) {
            throw std::invalid_argument("incremental_round: labels must be 0 or 1");
        }
    }
    const int64_t n = static_cast<int64_t>(xs.size());
    const bool touch_buffer = cfg.mode != Mode::kJoint;

    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    std::vector<StepLog> log;
    for (int64_t epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
        rng.shuffle(order);
        int64_t step = 0;
        for (int64_t start = 0; start < n; start += cfg.batch_size, ++step) {
            const int64_t stop = std::min(n, start + cfg.batch_size);
            std::vector<std::vector<double>> bx;
            std::vector<int> by;
            bx.reserve(static_cast<size_t>(stop - start));
            by.reserve(static_cast<size_t>(stop - start));
            for (int64_t i = start; i < stop; ++i) {
                const size_t idx = static_cast<size_t>(order[static_cast<size_t>(i)]);
                bx.push_back(xs[idx]);
                by.push_back(ys[idx]);
            }

            std::vector<replay::BufferEntry> b1, b2;
            if (cfg.mode == Mode::kFullLoss) {
                std::tie(b1, b2) = buffer.sample_two_batches(cfg.buffer_batch, rng);
            }

            Tape t;
            TotalLoss tl = total_loss(t, det, bx, by, b1, b2, cfg);
            if (!std::isfinite(tl.breakdown.total)) {
                throw std::runtime_error("incremental_round: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(step));
            }
            t.backward(tl.loss);
            det.params().adam_step(cfg.lr);

            if (touch_buffer) {
                auto preds = det.predict_batch(bx);
                for (size_t i = 0; i < bx.size(); ++i) {
                    buffer.offer({bx[i], by[i], preds[i].logits}, rng);
                }
            }
            log.push_back({epoch, step, tl.breakdown});
        }
    }
    return log;
}

std::string step_log_csv(const std::vector<StepLog>& log) {
    std::ostringstream out;
    out << "epoch,step,l_ce,l_il,l_lb,k,total\n";
    out << std::setprecision(17);
    for (const auto& row : log) {
        out << row.epoch << ',' << row.step << ',' << row.loss.l_ce << ',' << row.loss.l_il
            << ',' << row.loss.l_lb << ',' << row.loss.k << ',' << row.loss.total << '\n';
    }
    return out.str();
}

}  // namespace etguard::incremental
