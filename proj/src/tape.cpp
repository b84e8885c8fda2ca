#include "etguard/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace etguard {

namespace {

// c[m,n] += a[m,k] * b[k,n]
void matmul_acc(const NdArray& a, const NdArray& b, NdArray& c) {
    const int m = a.rows(), k = a.cols(), n = b.cols();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = pb + kk * n;
            double* crow = pc + i * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

// c[m,k] += a[m,n] * b^T where b is [k,n]
void matmul_acc_bt(const NdArray& a, const NdArray& b, NdArray& c) {
    const int m = a.rows(), n = a.cols(), k = b.rows();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + i * n;
        double* crow = pc + i * k;
        for (int kk = 0; kk < k; ++kk) {
            const double* brow = pb + kk * n;
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += arow[j] * brow[j];
            crow[kk] += s;
        }
    }
}

// c[k,n] += a^T * b where a is [m,k], b is [m,n]
void matmul_acc_at(const NdArray& a, const NdArray& b, NdArray& c) {
    const int m = a.rows(), k = a.cols(), n = b.cols();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        const double* brow = pb + i * n;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            if (aik == 0.0) continue;
            double* crow = pc + kk * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Var Tape::push(NdArray value, std::function<void(Tape&)> pull) {
    Node n;
    n.value = std::move(value);
    n.grad = NdArray(n.value.shape());
    n.pull = std::move(pull);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) {
    return nodes_.at(static_cast<size_t>(v.idx));
}

const Tape::Node& Tape::cnode(Var v) const {
    return nodes_.at(static_cast<size_t>(v.idx));
}

Var Tape::constant(NdArray v) {
    return push(std::move(v));
}

Var Tape::param(ParamStore& store, const std::string& name) {
    Var v = push(store.value(name));
    node(v).sink = &store.grad(name);
    node(v).store = &store;
    return v;
}

Var Tape::matmul(Var a, Var b) {
    const NdArray& va = cnode(a).value;
    const NdArray& vb = cnode(b).value;
    if (va.ndim() != 2 || vb.ndim() != 2 || va.cols() != vb.rows())
        throw std::invalid_argument("matmul: shape mismatch " + va.shape_str() + " x " + vb.shape_str());
    NdArray out({va.rows(), vb.cols()});
    matmul_acc(va, vb, out);
    const int ia = a.idx, ib = b.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, ib, io](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        matmul_acc_bt(g, t.nodes_[ib].value, t.nodes_[ia].grad); // dA += g * B^T
        matmul_acc_at(t.nodes_[ia].value, g, t.nodes_[ib].grad); // dB += A^T * g
    };
    return o;
}

Var Tape::add(Var a, Var b) {
    const NdArray& va = cnode(a).value;
    const NdArray& vb = cnode(b).value;
    require_same_shape(va, vb, "add");
    NdArray out = va;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    const int ia = a.idx, ib = b.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, ib, io](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        NdArray& ga = t.nodes_[ia].grad;
        NdArray& gb = t.nodes_[ib].grad;
        for (int64_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    };
    return o;
}

Var Tape::add_rowvec(Var a, Var b) {
    const NdArray& va = cnode(a).value;
    const NdArray& vb = cnode(b).value;
    if (vb.ndim() != 1 || vb.size() != va.cols())
        throw std::invalid_argument("add_rowvec: shape mismatch");
    NdArray out = va;
    const int m = va.rows(), n = va.cols();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) += vb[j];
    const int ia = a.idx, ib = b.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, ib, io, m, n](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        NdArray& ga = t.nodes_[ia].grad;
        NdArray& gb = t.nodes_[ib].grad;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                ga.at(i, j) += g.at(i, j);
                gb[j] += g.at(i, j);
            }
    };
    return o;
}

Var Tape::sub(Var a, Var b) {
    const NdArray& va = cnode(a).value;
    const NdArray& vb = cnode(b).value;
    require_same_shape(va, vb, "sub");
    NdArray out = va;
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    const int ia = a.idx, ib = b.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, ib, io](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        NdArray& ga = t.nodes_[ia].grad;
        NdArray& gb = t.nodes_[ib].grad;
        for (int64_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    };
    return o;
}

Var Tape::mul(Var a, Var b) {
    const NdArray& va = cnode(a).value;
    const NdArray& vb = cnode(b).value;
    require_same_shape(va, vb, "mul");
    NdArray out = va;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    const int ia = a.idx, ib = b.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, ib, io](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        NdArray& ga = t.nodes_[ia].grad;
        NdArray& gb = t.nodes_[ib].grad;
        const NdArray& va2 = t.nodes_[ia].value;
        const NdArray& vb2 = t.nodes_[ib].value;
        for (int64_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * vb2[i];
            gb[i] += g[i] * va2[i];
        }
    };
    return o;
}

Var Tape::scale(Var a, double c) {
    NdArray out = cnode(a).value;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= c;
    const int ia = a.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, io, c](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        NdArray& ga = t.nodes_[ia].grad;
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    };
    return o;
}

Var Tape::one_minus(Var a) {
    NdArray out = cnode(a).value;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 - out[i];
    const int ia = a.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, io](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        NdArray& ga = t.nodes_[ia].grad;
        for (int64_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
    };
    return o;
}

Var Tape::sigmoid(Var a) {
    NdArray out = cnode(a).value;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
    const int ia = a.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, io](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        const NdArray& s = t.nodes_[io].value;
        NdArray& ga = t.nodes_[ia].grad;
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
    };
    return o;
}

Var Tape::tanh_op(Var a) {
    NdArray out = cnode(a).value;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    const int ia = a.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, io](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        const NdArray& y = t.nodes_[io].value;
        NdArray& ga = t.nodes_[ia].grad;
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    };
    return o;
}

Var Tape::relu(Var a) {
    NdArray out = cnode(a).value;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    const int ia = a.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [ia, io](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        const NdArray& x = t.nodes_[ia].value;
        NdArray& ga = t.nodes_[ia].grad;
        for (int64_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) ga[i] += g[i];
    };
    return o;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    const int m = cnode(parts[0]).value.rows();
    int total = 0;
    for (Var p : parts) {
        const NdArray& v = cnode(p).value;
        if (v.ndim() != 2 || v.rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
        total += v.cols();
    }
    NdArray out({m, total});
    int off = 0;
    std::vector<int> idxs, widths, offsets;
    for (Var p : parts) {
        const NdArray& v = cnode(p).value;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < v.cols(); ++j) out.at(i, off + j) = v.at(i, j);
        idxs.push_back(p.idx);
        widths.push_back(v.cols());
        offsets.push_back(off);
        off += v.cols();
    }
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [idxs, widths, offsets, io, m](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        for (size_t p = 0; p < idxs.size(); ++p) {
            NdArray& gp = t.nodes_[idxs[p]].grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < widths[p]; ++j) gp.at(i, j) += g.at(i, offsets[p] + j);
        }
    };
    return o;
}

Var Tape::embed_rows(Var table, const std::vector<int>& ids) {
    const NdArray& tv = cnode(table).value;
    if (tv.ndim() != 2) throw std::invalid_argument("embed_rows: table must be 2-D");
    const int cols = tv.cols();
    NdArray out({static_cast<int>(ids.size()), cols});
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tv.rows()) throw std::invalid_argument("embed_rows: id out of range");
        for (int j = 0; j < cols; ++j) out.at(static_cast<int>(i), j) = tv.at(ids[i], j);
    }
    const int it = table.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [it, io, ids, cols](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        NdArray& gt = t.nodes_[it].grad;
        for (size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < cols; ++j) gt.at(ids[i], j) += g.at(static_cast<int>(i), j);
    };
    return o;
}

Var Tape::mask_mix(const std::vector<double>& mask, Var fresh, Var prev) {
    const NdArray& vf = cnode(fresh).value;
    const NdArray& vp = cnode(prev).value;
    require_same_shape(vf, vp, "mask_mix");
    if (static_cast<int>(mask.size()) != vf.rows())
        throw std::invalid_argument("mask_mix: mask length mismatch");
    NdArray out = vf;
    const int m = vf.rows(), n = vf.cols();
    for (int i = 0; i < m; ++i) {
        const double w = mask[i];
        for (int j = 0; j < n; ++j) out.at(i, j) = w * vf.at(i, j) + (1.0 - w) * vp.at(i, j);
    }
    const int if_ = fresh.idx, ip = prev.idx;
    Var o = push(std::move(out));
    const int io = o.idx;
    node(o).pull = [if_, ip, io, mask, m, n](Tape& t) {
        const NdArray& g = t.nodes_[io].grad;
        NdArray& gf = t.nodes_[if_].grad;
        NdArray& gp = t.nodes_[ip].grad;
        for (int i = 0; i < m; ++i) {
            const double w = mask[i];
            for (int j = 0; j < n; ++j) {
                gf.at(i, j) += w * g.at(i, j);
                gp.at(i, j) += (1.0 - w) * g.at(i, j);
            }
        }
    };
    return o;
}

Var Tape::softmax_xent_wsum(Var logits, const std::vector<int>& labels,
                            const std::vector<double>& weights) {
    const NdArray& z = cnode(logits).value;
    if (z.ndim() != 2) throw std::invalid_argument("softmax_xent_wsum: logits must be 2-D");
    const int m = z.rows(), c = z.cols();
    if (static_cast<int>(labels.size()) != m || static_cast<int>(weights.size()) != m)
        throw std::invalid_argument("softmax_xent_wsum: label/weight length mismatch");
    std::vector<double> probs(static_cast<size_t>(m) * c);
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        if (labels[i] < 0 || labels[i] >= c)
            throw std::invalid_argument("softmax_xent_wsum: label out of range");
        double zmax = z.at(i, 0);
        for (int j = 1; j < c; ++j) zmax = std::max(zmax, z.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < c; ++j) sum += std::exp(z.at(i, j) - zmax);
        const double lse = zmax + std::log(sum);
        for (int j = 0; j < c; ++j) probs[static_cast<size_t>(i) * c + j] = std::exp(z.at(i, j) - lse);
        total += weights[i] * (lse - z.at(i, labels[i]));
    }
    const int iz = logits.idx;
    Var o = push(NdArray::scalar(total));
    const int io = o.idx;
    node(o).pull = [iz, io, labels, weights, probs, m, c](Tape& t) {
        const double g = t.nodes_[io].grad[0];
        NdArray& gz = t.nodes_[iz].grad;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < c; ++j) {
                const double p = probs[static_cast<size_t>(i) * c + j];
                const double onehot = (j == labels[i]) ? 1.0 : 0.0;
                gz.at(i, j) += g * weights[i] * (p - onehot);
            }
        }
    };
    return o;
}

Var Tape::mse_sum_rows(Var a, const NdArray& target) {
    const NdArray& va = cnode(a).value;
    require_same_shape(va, target, "mse_sum_rows");
    double total = 0.0;
    for (int64_t i = 0; i < va.size(); ++i) {
        const double d = va[i] - target[i];
        total += d * d;
    }
    const int ia = a.idx;
    Var o = push(NdArray::scalar(total));
    const int io = o.idx;
    node(o).pull = [ia, io, target](Tape& t) {
        const double g = t.nodes_[io].grad[0];
        const NdArray& va2 = t.nodes_[ia].value;
        NdArray& ga = t.nodes_[ia].grad;
        for (int64_t i = 0; i < va2.size(); ++i) ga[i] += g * 2.0 * (va2[i] - target[i]);
    };
    return o;
}

const NdArray& Tape::value(Var v) const {
    return cnode(v).value;
}

const NdArray& Tape::grad_of(Var v) const {
    return cnode(v).grad;
}

void Tape::backward(Var loss) {
    if (backward_done_) throw std::logic_error("Tape::backward called twice without reset");
    backward_done_ = true;
    Node& ln = node(loss);
    if (ln.value.size() != 1) throw std::invalid_argument("Tape::backward: loss must be scalar");
    ln.grad[0] = 1.0;
    std::set<ParamStore*> touched;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.pull) n.pull(*this);
        if (n.sink) {
            for (int64_t j = 0; j < n.grad.size(); ++j) (*n.sink)[j] += n.grad[j];
            touched.insert(n.store);
        }
    }
    for (ParamStore* ps : touched)
        if (ps) ps->note_backward();
}

} // namespace etguard
