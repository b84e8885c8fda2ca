#include "etguard/layers.hpp"

#include <stdexcept>

namespace etguard {

void init_linear_params(ParamStore& ps, const std::string& prefix, int in_dim, int out_dim,
                        RngState& rng) {
    ps.create_glorot(prefix + ".W", in_dim, out_dim, rng);
    ps.create(prefix + ".b", {out_dim});
}

Var linear_forward(Tape& t, Var x, ParamStore& ps, const std::string& prefix) {
    Var w = t.param(ps, prefix + ".W");
    Var b = t.param(ps, prefix + ".b");
    return t.add_rowvec(t.matmul(x, w), b);
}

void init_gru_cell_params(ParamStore& ps, const std::string& prefix, int in_dim, int hidden,
                          RngState& rng) {
    for (const char* gate : {".Wz", ".Wr", ".Wh"})
        ps.create_glorot(prefix + gate, in_dim, hidden, rng);
    for (const char* gate : {".Uz", ".Ur", ".Uh"})
        ps.create_glorot(prefix + gate, hidden, hidden, rng);
    for (const char* gate : {".bz", ".br", ".bh"})
        ps.create(prefix + gate, {hidden});
}

Var gru_cell_forward(Tape& t, Var x, Var h_prev, ParamStore& ps, const std::string& prefix) {
    Var wz = t.param(ps, prefix + ".Wz");
    Var uz = t.param(ps, prefix + ".Uz");
    Var bz = t.param(ps, prefix + ".bz");
    Var wr = t.param(ps, prefix + ".Wr");
    Var ur = t.param(ps, prefix + ".Ur");
    Var br = t.param(ps, prefix + ".br");
    Var wh = t.param(ps, prefix + ".Wh");
    Var uh = t.param(ps, prefix + ".Uh");
    Var bh = t.param(ps, prefix + ".bh");

    Var z = t.sigmoid(t.add_rowvec(t.add(t.matmul(x, wz), t.matmul(h_prev, uz)), bz));
    Var r = t.sigmoid(t.add_rowvec(t.add(t.matmul(x, wr), t.matmul(h_prev, ur)), br));
    Var cand = t.tanh_op(
        t.add_rowvec(t.add(t.matmul(x, wh), t.matmul(t.mul(r, h_prev), uh)), bh));
    return t.add(t.mul(t.one_minus(z), h_prev), t.mul(z, cand));
}

void init_bi_gru_stack_params(ParamStore& ps, const std::string& prefix, int in_dim, int hidden,
                              int layers, RngState& rng) {
    int layer_in = in_dim;
    for (int l = 0; l < layers; ++l) {
        const std::string base = prefix + ".l" + std::to_string(l);
        init_gru_cell_params(ps, base + ".fwd", layer_in, hidden, rng);
        init_gru_cell_params(ps, base + ".bwd", layer_in, hidden, rng);
        layer_in = 2 * hidden;
    }
}

BiGruStackOut bi_gru_stack_forward(Tape& t, const std::vector<Var>& steps,
                                   const std::vector<std::vector<double>>& masks, ParamStore& ps,
                                   const std::string& prefix, int hidden, int layers) {
    if (steps.empty()) throw std::invalid_argument("bi_gru_stack_forward: empty sequence");
    if (masks.size() != steps.size())
        throw std::invalid_argument("bi_gru_stack_forward: mask count mismatch");
    const int batch = t.value(steps[0]).rows();
    const int S = static_cast<int>(steps.size());

    std::vector<Var> layer_in = steps;
    std::vector<Var> finals;
    for (int l = 0; l < layers; ++l) {
        const std::string base = prefix + ".l" + std::to_string(l);
        Var h0 = t.constant(NdArray({batch, hidden}));

        std::vector<Var> fwd(static_cast<size_t>(S));
        Var h = h0;
        for (int s = 0; s < S; ++s) {
            Var fresh = gru_cell_forward(t, layer_in[static_cast<size_t>(s)], h, ps, base + ".fwd");
            h = t.mask_mix(masks[static_cast<size_t>(s)], fresh, h);
            fwd[static_cast<size_t>(s)] = h;
        }
        Var fwd_final = h;

        std::vector<Var> bwd(static_cast<size_t>(S));
        h = h0;
        for (int s = S - 1; s >= 0; --s) {
            Var fresh = gru_cell_forward(t, layer_in[static_cast<size_t>(s)], h, ps, base + ".bwd");
            h = t.mask_mix(masks[static_cast<size_t>(s)], fresh, h);
            bwd[static_cast<size_t>(s)] = h;
        }
        Var bwd_final = h;

        std::vector<Var> outs(static_cast<size_t>(S));
        for (int s = 0; s < S; ++s)
            outs[static_cast<size_t>(s)] =
                t.concat_cols({fwd[static_cast<size_t>(s)], bwd[static_cast<size_t>(s)]});
        layer_in = std::move(outs);
        finals.push_back(fwd_final);
        finals.push_back(bwd_final);
    }

    BiGruStackOut out;
    out.step_outputs = std::move(layer_in);
    out.final_state = t.concat_cols(finals);
    return out;
}

} // namespace etguard
