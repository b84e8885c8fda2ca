#pragma once

#include <string>
#include <vector>

#include "etguard/param_store.hpp"
#include "etguard/rng.hpp"
#include "etguard/tape.hpp"

namespace etguard {

// Fully connected layer, parameters "<prefix>.W" [in,out] and "<prefix>.b" [out].
void init_linear_params(ParamStore& ps, const std::string& prefix, int in_dim, int out_dim,
                        RngState& rng);
Var linear_forward(Tape& t, Var x, ParamStore& ps, const std::string& prefix);

// Gated recurrent unit cell. Parameter names under <prefix>:
//   .Wz .Uz .bz   update gate
//   .Wr .Ur .br   reset gate
//   .Wh .Uh .bh   candidate
// State update: h = (1-z) .* h_prev + z .* tanh(x Wh + (r .* h_prev) Uh + bh).
void init_gru_cell_params(ParamStore& ps, const std::string& prefix, int in_dim, int hidden,
                          RngState& rng);
Var gru_cell_forward(Tape& t, Var x, Var h_prev, ParamStore& ps, const std::string& prefix);

// Stacked bidirectional GRU over a padded batch. steps[s] is [batch, in_dim];
// masks[s][i] is 1 while step s is inside sequence i, 0 once past its end.
// Masked steps carry the previous state through unchanged, so the forward
// scan's final state is each sequence's state at its true last step and the
// backward scan's final state is the state at step 0.
struct BiGruStackOut {
    std::vector<Var> step_outputs; // top layer, [batch, 2*hidden] each
    Var final_state;               // [batch, 2*layers*hidden]
};

void init_bi_gru_stack_params(ParamStore& ps, const std::string& prefix, int in_dim, int hidden,
                              int layers, RngState& rng);
BiGruStackOut bi_gru_stack_forward(Tape& t, const std::vector<Var>& steps,
                                   const std::vector<std::vector<double>>& masks, ParamStore& ps,
                                   const std::string& prefix, int hidden, int layers);

} // namespace etguard
