#include "etguard/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "etguard/layers.hpp"
#include "etguard/losses.hpp"

namespace etguard::detection {

void DetectorConfig::validate() const {
    if (input_dim < 1 || hidden1 < 1 || hidden2 < 1 || classes < 2)
        throw std::invalid_argument("detector: bad layer sizes");
}

DetectorModel::DetectorModel(DetectorConfig cfg, RngState& rng) : cfg_(cfg) {
    cfg_.validate();
    init_linear_params(params_, "det.fc1", cfg_.input_dim, cfg_.hidden1, rng);
    init_linear_params(params_, "det.fc2", cfg_.hidden1, cfg_.hidden2, rng);
    init_linear_params(params_, "det.fc3", cfg_.hidden2, cfg_.classes, rng);
}

DetectorModel::DetectorModel(DetectorConfig cfg, ParamStore params)
    : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    for (const char* name : {"det.fc1.W", "det.fc2.W", "det.fc3.W"})
        if (!params_.has(name))
            throw std::invalid_argument(std::string("detector: missing parameter ") + name);
    const NdArray& w1 = params_.value("det.fc1.W");
    if (w1.rows() != cfg_.input_dim || w1.cols() != cfg_.hidden1)
        throw std::invalid_argument("detector: first layer shape mismatch");
}

Var DetectorModel::forward(Tape& t, Var x) {
    Var h1 = t.relu(linear_forward(t, x, params_, "det.fc1"));
    Var h2 = t.relu(linear_forward(t, h1, params_, "det.fc2"));
    return linear_forward(t, h2, params_, "det.fc3");
}

NdArray DetectorModel::to_matrix(const std::vector<std::vector<double>>& xs) const {
    if (xs.empty()) throw std::invalid_argument("detector: empty batch");
    NdArray m({static_cast<int>(xs.size()), cfg_.input_dim});
    for (size_t i = 0; i < xs.size(); ++i) {
        if (static_cast<int>(xs[i].size()) != cfg_.input_dim)
            throw std::invalid_argument("detector: input width mismatch");
        for (int j = 0; j < cfg_.input_dim; ++j) m.at(static_cast<int>(i), j) = xs[i][static_cast<size_t>(j)];
    }
    return m;
}

Prediction DetectorModel::predict(const std::vector<double>& x) {
    return predict_batch({x})[0];
}

std::vector<Prediction> DetectorModel::predict_batch(const std::vector<std::vector<double>>& xs) {
    Tape t;
    Var logits = forward(t, t.constant(to_matrix(xs)));
    const NdArray& z = t.value(logits);
    std::vector<Prediction> out(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        Prediction& p = out[i];
        p.logits.resize(static_cast<size_t>(cfg_.classes));
        for (int j = 0; j < cfg_.classes; ++j) p.logits[static_cast<size_t>(j)] = z.at(static_cast<int>(i), j);
        p.probabilities = softmax(p.logits);
        int best = 0;
        for (int j = 1; j < cfg_.classes; ++j)
            if (p.logits[static_cast<size_t>(j)] > p.logits[static_cast<size_t>(best)]) best = j;
        p.label = best;
    }
    return out;
}

std::vector<double> pretrain(DetectorModel& model, const std::vector<std::vector<double>>& xs,
                             const std::vector<int>& ys, const PretrainConfig& cfg,
                             RngState& rng) {
    if (xs.empty() || xs.size() != ys.size())
        throw std::invalid_argument("pretrain: empty or mismatched dataset");
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("pretrain: bad epochs/batch size");
    std::set<int> classes(ys.begin(), ys.end());
    if (classes.size() < 2)
        throw std::invalid_argument("pretrain: need both classes in the training set");

    std::vector<size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> curve;
    curve.reserve(static_cast<size_t>(cfg.epochs));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0, n_sum = 0.0;
        for (size_t base = 0; base < order.size(); base += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), base + static_cast<size_t>(cfg.batch_size));
            std::vector<std::vector<double>> bx;
            std::vector<int> by;
            for (size_t i = base; i < end; ++i) {
                bx.push_back(xs[order[i]]);
                by.push_back(ys[order[i]]);
            }
            Tape t;
            Var logits = model.forward(t, t.constant(model.to_matrix(bx)));
            Var loss = cross_entropy_loss(t, logits, by);
            const double lv = t.value(loss)[0];
            if (!std::isfinite(lv))
                throw std::runtime_error("pretrain: non-finite loss at epoch " + std::to_string(epoch));
            t.backward(loss);
            model.params().adam_step(cfg.lr);
            loss_sum += lv * static_cast<double>(by.size());
            n_sum += static_cast<double>(by.size());
        }
        curve.push_back(loss_sum / n_sum);
    }
    return curve;
}

MetricsReport compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.empty() || predicted.size() != truth.size())
        throw std::invalid_argument("compute_metrics: empty or mismatched inputs");
    MetricsReport r;
    for (size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] == 1;
        const bool t = truth[i] == 1;
        if (p && t)
            ++r.tp;
        else if (p && !t)
            ++r.fp;
        else if (!p && t)
            ++r.fn;
        else
            ++r.tn;
    }
    const double n = static_cast<double>(predicted.size());
    r.accuracy = static_cast<double>(r.tp + r.tn) / n;
    r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
    r.recall = (r.tp + r.fn) > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

} // namespace etguard::detection
