#include "etguard/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "etguard/losses.hpp"

namespace etguard::features {

using ingest::NormalizedSequence;

void AutoEncoderConfig::validate() const {
    if (head_packets < 1) throw std::invalid_argument("autoencoder: head_packets must be >= 1");
    if (num_buckets < 2) throw std::invalid_argument("autoencoder: need at least 2 buckets");
    if (hidden < 1 || layers < 1 || recon_hidden < 1)
        throw std::invalid_argument("autoencoder: non-positive layer size");
    if (feature_dim != 2 * layers * hidden)
        throw std::invalid_argument("autoencoder: feature_dim must equal 2*layers*hidden");
}

AutoEncoderModel::AutoEncoderModel(AutoEncoderConfig cfg, RngState& rng) : cfg_(cfg) {
    cfg_.validate();
    params_.create_glorot("ae.embed", cfg_.num_buckets + 1, cfg_.feature_dim, rng);
    init_bi_gru_stack_params(params_, "ae.enc", cfg_.feature_dim, cfg_.hidden, cfg_.layers, rng);
    init_bi_gru_stack_params(params_, "ae.dec", cfg_.feature_dim, cfg_.hidden, cfg_.layers, rng);
    init_linear_params(params_, "ae.rec1", 2 * cfg_.hidden, cfg_.recon_hidden, rng);
    init_linear_params(params_, "ae.rec2", cfg_.recon_hidden, cfg_.num_buckets, rng);
}

AutoEncoderModel::AutoEncoderModel(AutoEncoderConfig cfg, ParamStore params)
    : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    for (const char* name : {"ae.embed", "ae.rec1.W", "ae.rec2.W"})
        if (!params_.has(name))
            throw std::invalid_argument(std::string("autoencoder: missing parameter ") + name);
    const NdArray& embed = params_.value("ae.embed");
    if (embed.rows() != cfg_.num_buckets + 1 || embed.cols() != cfg_.feature_dim)
        throw std::invalid_argument("autoencoder: embedding shape mismatch");
}

AutoEncoderModel::TapedForward AutoEncoderModel::forward(
    Tape& t, const std::vector<const NormalizedSequence*>& batch) {
    if (batch.empty()) throw std::invalid_argument("autoencoder: empty batch");
    const int S = cfg_.head_packets;
    const int n = static_cast<int>(batch.size());
    for (const NormalizedSequence* seq : batch)
        if (static_cast<int>(seq->buckets.size()) != S || static_cast<int>(seq->mask.size()) != S)
            throw std::invalid_argument("autoencoder: sequence length mismatch");

    Var embed = t.param(params_, "ae.embed");
    std::vector<Var> enc_steps;
    std::vector<std::vector<double>> masks;
    enc_steps.reserve(static_cast<size_t>(S));
    masks.reserve(static_cast<size_t>(S));
    for (int s = 0; s < S; ++s) {
        std::vector<int> ids(static_cast<size_t>(n));
        std::vector<double> mask(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            ids[static_cast<size_t>(i)] = batch[static_cast<size_t>(i)]->buckets[static_cast<size_t>(s)];
            mask[static_cast<size_t>(i)] = batch[static_cast<size_t>(i)]->mask[static_cast<size_t>(s)] ? 1.0 : 0.0;
        }
        enc_steps.push_back(t.embed_rows(embed, ids));
        masks.push_back(std::move(mask));
    }

    const BiGruStackOut enc =
        bi_gru_stack_forward(t, enc_steps, masks, params_, "ae.enc", cfg_.hidden, cfg_.layers);

    std::vector<Var> dec_steps(static_cast<size_t>(S), enc.final_state);
    const BiGruStackOut dec =
        bi_gru_stack_forward(t, dec_steps, masks, params_, "ae.dec", cfg_.hidden, cfg_.layers);

    TapedForward out;
    out.features = enc.final_state;
    out.step_scores.reserve(static_cast<size_t>(S));
    for (int s = 0; s < S; ++s) {
        Var h = t.relu(linear_forward(t, dec.step_outputs[static_cast<size_t>(s)], params_, "ae.rec1"));
        out.step_scores.push_back(linear_forward(t, h, params_, "ae.rec2"));
    }
    return out;
}

Var AutoEncoderModel::taped_reconstruction_loss(
    Tape& t, const TapedForward& fwd, const std::vector<const NormalizedSequence*>& batch) {
    const int S = cfg_.head_packets;
    const int n = static_cast<int>(batch.size());
    double valid_total = 0.0;
    for (const NormalizedSequence* seq : batch)
        for (uint8_t m : seq->mask) valid_total += m ? 1.0 : 0.0;
    if (valid_total == 0.0)
        throw std::invalid_argument("autoencoder: no valid steps in batch");

    Var total = t.constant(NdArray::scalar(0.0));
    for (int s = 0; s < S; ++s) {
        std::vector<int> labels(static_cast<size_t>(n), 0);
        std::vector<double> weights(static_cast<size_t>(n), 0.0);
        bool any = false;
        for (int i = 0; i < n; ++i) {
            const NormalizedSequence* seq = batch[static_cast<size_t>(i)];
            if (seq->mask[static_cast<size_t>(s)]) {
                labels[static_cast<size_t>(i)] = seq->buckets[static_cast<size_t>(s)];
                weights[static_cast<size_t>(i)] = 1.0;
                any = true;
            }
        }
        if (!any) continue;
        total = t.add(total, t.softmax_xent_wsum(fwd.step_scores[static_cast<size_t>(s)], labels, weights));
    }
    return t.scale(total, 1.0 / valid_total);
}

std::vector<double> AutoEncoderModel::encode(const NormalizedSequence& seq) {
    Tape t;
    const TapedForward fwd = forward(t, {&seq});
    const NdArray& f = t.value(fwd.features);
    return std::vector<double>(f.data().begin(), f.data().end());
}

NdArray AutoEncoderModel::reconstruct(const NormalizedSequence& seq) {
    Tape t;
    const TapedForward fwd = forward(t, {&seq});
    NdArray out({cfg_.head_packets, cfg_.num_buckets});
    for (int s = 0; s < cfg_.head_packets; ++s) {
        const NdArray& row = t.value(fwd.step_scores[static_cast<size_t>(s)]);
        for (int j = 0; j < cfg_.num_buckets; ++j) out.at(s, j) = row.at(0, j);
    }
    return out;
}

std::vector<std::vector<double>> AutoEncoderModel::extract_features(
    const std::vector<NormalizedSequence>& seqs) {
    std::vector<std::vector<double>> out;
    out.reserve(seqs.size());
    const size_t chunk = 256;
    for (size_t base = 0; base < seqs.size(); base += chunk) {
        const size_t end = std::min(seqs.size(), base + chunk);
        std::vector<const NormalizedSequence*> batch;
        for (size_t i = base; i < end; ++i) batch.push_back(&seqs[i]);
        Tape t;
        const TapedForward fwd = forward(t, batch);
        const NdArray& f = t.value(fwd.features);
        for (size_t i = base; i < end; ++i) {
            const int r = static_cast<int>(i - base);
            std::vector<double> row(static_cast<size_t>(cfg_.feature_dim) + 2);
            for (int j = 0; j < cfg_.feature_dim; ++j)
                row[static_cast<size_t>(j)] = f.at(r, j);
            row[static_cast<size_t>(cfg_.feature_dim)] = seqs[i].d_norm;
            row[static_cast<size_t>(cfg_.feature_dim) + 1] = seqs[i].t_m_norm;
            out.push_back(std::move(row));
        }
    }
    return out;
}

double reconstruction_loss(const NdArray& scores, const NormalizedSequence& seq) {
    const int S = static_cast<int>(seq.buckets.size());
    if (scores.rows() != S) throw std::invalid_argument("reconstruction_loss: step count mismatch");
    double total = 0.0;
    int valid = 0;
    for (int s = 0; s < S; ++s) {
        if (!seq.mask[static_cast<size_t>(s)]) continue;
        std::vector<double> row(static_cast<size_t>(scores.cols()));
        for (int j = 0; j < scores.cols(); ++j) row[static_cast<size_t>(j)] = scores.at(s, j);
        const std::vector<double> p = softmax(row);
        const int truth = seq.buckets[static_cast<size_t>(s)];
        if (truth < 0 || truth >= scores.cols())
            throw std::invalid_argument("reconstruction_loss: bucket out of range");
        total += -std::log(std::max(p[static_cast<size_t>(truth)], 1e-300));
        ++valid;
    }
    if (valid == 0) throw std::invalid_argument("reconstruction_loss: no valid steps");
    return total / valid;
}

std::pair<AutoEncoderModel, std::vector<double>> train_autoencoder(
    const AutoEncoderConfig& cfg, const std::vector<NormalizedSequence>& data, int epochs,
    int batch_size, double lr, RngState& rng) {
    if (data.empty()) throw std::invalid_argument("train_autoencoder: empty dataset");
    if (epochs < 1 || batch_size < 1)
        throw std::invalid_argument("train_autoencoder: bad epochs/batch size");

    AutoEncoderModel model(cfg, rng);
    std::vector<double> curve;
    curve.reserve(static_cast<size_t>(epochs));
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        double sample_sum = 0.0;
        for (size_t base = 0; base < order.size(); base += static_cast<size_t>(batch_size)) {
            const size_t end = std::min(order.size(), base + static_cast<size_t>(batch_size));
            std::vector<const NormalizedSequence*> batch;
            for (size_t i = base; i < end; ++i) batch.push_back(&data[order[i]]);
            Tape t;
            const AutoEncoderModel::TapedForward fwd = model.forward(t, batch);
            Var loss = model.taped_reconstruction_loss(t, fwd, batch);
            const double lv = t.value(loss)[0];
            if (!std::isfinite(lv))
                throw std::runtime_error("train_autoencoder: non-finite loss at epoch " +
                                         std::to_string(epoch));
            t.backward(loss);
            model.params().adam_step(lr);
            loss_sum += lv * static_cast<double>(batch.size());
            sample_sum += static_cast<double>(batch.size());
        }
        curve.push_back(loss_sum / sample_sum);
    }
    return {std::move(model), std::move(curve)};
}

} // namespace etguard::features
