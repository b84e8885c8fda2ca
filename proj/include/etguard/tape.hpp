#pragma once

#include <functional>
#include <set>
#include <vector>

#include "etguard/ndarray.hpp"
#include "etguard/param_store.hpp"

namespace etguard {

struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

// Recorded computation tape for reverse-mode differentiation. Every op appends
// a node holding the forward value and a closure that routes the node's
// gradient to its inputs. backward() runs the closures newest-first; leaf
// gradients land in their ParamStore accumulators.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(NdArray v);
    Var param(ParamStore& store, const std::string& name);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);           // same shape
    Var add_rowvec(Var a, Var b);    // [m,n] + [n]
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);           // elementwise
    Var scale(Var a, double c);
    Var one_minus(Var a);            // 1 - x elementwise
    Var sigmoid(Var a);
    Var tanh_op(Var a);
    Var relu(Var a);
    Var concat_cols(const std::vector<Var>& parts);

    // Gather rows of `table` by index; backward scatter-adds.
    Var embed_rows(Var table, const std::vector<int>& ids);

    // out[i,:] = m[i]*fresh[i,:] + (1-m[i])*prev[i,:]; the mask is constant.
    Var mask_mix(const std::vector<double>& mask, Var fresh, Var prev);

    // Sum over rows of w[i] * cross_entropy(softmax(logits[i,:]), labels[i]).
    // Numerically stabilized; returns a scalar. Callers divide by the weight
    // total via scale().
    Var softmax_xent_wsum(Var logits, const std::vector<int>& labels,
                          const std::vector<double>& weights);

    // Sum over rows of ||a[i,:] - target[i,:]||^2 against a constant target.
    Var mse_sum_rows(Var a, const NdArray& target);

    const NdArray& value(Var v) const;
    const NdArray& grad_of(Var v) const;

    // Seeds d(loss)/d(loss) = 1 and pulls gradients back to every leaf.
    // Calling it a second time on the same tape throws.
    void backward(Var loss);

private:
    struct Node {
        NdArray value;
        NdArray grad;
        std::function<void(Tape&)> pull;
        NdArray* sink = nullptr;
        ParamStore* store = nullptr;
    };
    std::vector<Node> nodes_;
    bool backward_done_ = false;

    Var push(NdArray value, std::function<void(Tape&)> pull = nullptr);
    Node& node(Var v);
    const Node& cnode(Var v) const;
};

} // namespace etguard
