#include "sdn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sdn/finite_diff.hpp"
#include "sdn/rng.hpp"

namespace sdn {

namespace {

void require_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2) throw InvalidInput(std::string(who) + ": rank-2 tensor required");
}

double stable_lse(const double* v, std::size_t n) {
    double m = v[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, v[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw InvalidInput("Var does not belong to this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

Tape::Node& Tape::node(Var v) {
    return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

Var Tape::push(Tensor value, bool requires_grad,
               std::function<void(Tape&, const Tensor&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buf(Var target) {
    Node& n = node(target);
    if (!n.grad_live) {
        n.grad = Tensor(n.value.shape());
        n.grad_live = true;
    }
    return n.grad;
}

void Tape::accum(Var target, const Tensor& contribution) {
    Node& n = node(target);
    if (!n.requires_grad) return;
    grad_buf(target) += contribution;
}

Var Tape::constant(Tensor value) {
    return push(std::move(value), false, nullptr);
}

Var Tape::param(Tensor value) {
    return push(std::move(value), true, nullptr);
}

const Tensor& Tape::grad(Var v) {
    Node& n = node(v);
    if (!n.grad_live) {
        n.grad = Tensor(n.value.shape());
        n.grad_live = true;
    }
    return n.grad;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var Tape::add(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw InvalidInput("add: shape mismatch");
    Tensor out = va;
    out += vb;
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(out), rg, [a, b](Tape& t, const Tensor& g) {
        t.accum(a, g);
        t.accum(b, g);
    });
}

Var Tape::sub(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw InvalidInput("sub: shape mismatch");
    Tensor out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(out), rg, [a, b](Tape& t, const Tensor& g) {
        t.accum(a, g);
        if (t.node(b).requires_grad) {
            Tensor neg = g;
            neg *= -1.0;
            t.accum(b, neg);
        }
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw InvalidInput("mul: shape mismatch");
    Tensor out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(out), rg, [a, b](Tape& t, const Tensor& g) {
        if (t.node(a).requires_grad) {
            Tensor da = g;
            const Tensor& vb2 = t.value(b);
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= vb2[i];
            t.accum(a, da);
        }
        if (t.node(b).requires_grad) {
            Tensor db = g;
            const Tensor& va2 = t.value(a);
            for (std::size_t i = 0; i < db.size(); ++i) db[i] *= va2[i];
            t.accum(b, db);
        }
    });
}

Var Tape::scale(Var a, double factor) {
    Tensor out = value(a);
    out *= factor;
    return push(std::move(out), node(a).requires_grad, [a, factor](Tape& t, const Tensor& g) {
        Tensor da = g;
        da *= factor;
        t.accum(a, da);
    });
}

Var Tape::add_const(Var a, const Tensor& t) {
    const Tensor& va = value(a);
    if (!va.same_shape(t)) throw InvalidInput("add_const: shape mismatch");
    Tensor out = va;
    out += t;
    return push(std::move(out), node(a).requires_grad,
                [a](Tape& tp, const Tensor& g) { tp.accum(a, g); });
}

Var Tape::mul_const(Var a, const Tensor& t) {
    const Tensor& va = value(a);
    if (!va.same_shape(t)) throw InvalidInput("mul_const: shape mismatch");
    Tensor out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= t[i];
    Tensor factor = t;
    return push(std::move(out), node(a).requires_grad,
                [a, factor = std::move(factor)](Tape& tp, const Tensor& g) {
                    Tensor da = g;
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] *= factor[i];
                    tp.accum(a, da);
                });
}

Var Tape::relu(Var a) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
    return push(std::move(out), node(a).requires_grad, [a](Tape& t, const Tensor& g) {
        Tensor da = g;
        const Tensor& va = t.value(a);
        for (std::size_t i = 0; i < da.size(); ++i) {
            if (va[i] <= 0.0) da[i] = 0.0;
        }
        t.accum(a, da);
    });
}

Var Tape::exp(Var a) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    Var result = push(std::move(out), node(a).requires_grad, nullptr);
    node(result).backprop = [a, result](Tape& t, const Tensor& g) {
        Tensor da = g;
        const Tensor& ev = t.value(result);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] *= ev[i];
        t.accum(a, da);
    };
    return result;
}

Var Tape::log(Var a) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
    return push(std::move(out), node(a).requires_grad, [a](Tape& t, const Tensor& g) {
        Tensor da = g;
        const Tensor& va = t.value(a);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] /= va[i];
        t.accum(a, da);
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require_rank2(va, "matmul lhs");
    require_rank2(vb, "matmul rhs");
    if (va.cols() != vb.rows()) throw InvalidInput("matmul: inner dimensions differ");
    const std::size_t n = va.rows(), k = va.cols(), m = vb.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double ail = va.at(i, l);
            if (ail == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) out.at(i, j) += ail * vb.at(l, j);
        }
    }
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(out), rg, [a, b, n, k, m](Tape& t, const Tensor& g) {
        if (t.node(a).requires_grad) {
            Tensor da({n, k});
            const Tensor& vb2 = t.value(b);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    const double gij = g.at(i, j);
                    if (gij == 0.0) continue;
                    for (std::size_t l = 0; l < k; ++l) da.at(i, l) += gij * vb2.at(l, j);
                }
            }
            t.accum(a, da);
        }
        if (t.node(b).requires_grad) {
            Tensor db({k, m});
            const Tensor& va2 = t.value(a);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t l = 0; l < k; ++l) {
                    const double ail = va2.at(i, l);
                    if (ail == 0.0) continue;
                    for (std::size_t j = 0; j < m; ++j) db.at(l, j) += ail * g.at(i, j);
                }
            }
            t.accum(b, db);
        }
    });
}

Var Tape::linear(Var x, Var w, Var b, bool with_relu) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(w);
    const Tensor& vb = value(b);
    require_rank2(vx, "linear input");
    require_rank2(vw, "linear weight");
    if (vb.rank() != 1 || vb.size() != vw.rows() || vx.cols() != vw.cols()) {
        throw InvalidInput("linear: incompatible shapes");
    }
    const std::size_t rows = vx.rows(), in = vx.cols(), out_dim = vw.rows();
    Tensor out({rows, out_dim});
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xi = vx.data() + i * in;
        double* oi = out.data() + i * out_dim;
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* wo = vw.data() + o * in;
            double acc = vb[o];
            for (std::size_t l = 0; l < in; ++l) acc += xi[l] * wo[l];
            oi[o] = with_relu ? std::max(0.0, acc) : acc;
        }
    }
    const bool rg =
        node(x).requires_grad || node(w).requires_grad || node(b).requires_grad;
    Var result = push(std::move(out), rg, nullptr);
    node(result).backprop = [x, w, b, with_relu, rows, in, out_dim, result](
                                Tape& t, const Tensor& g) {
        // Mask the incoming gradient through the fused activation first.
        Tensor gm = g;
        if (with_relu) {
            const Tensor& vo = t.value(result);
            for (std::size_t i = 0; i < gm.size(); ++i) {
                if (vo[i] <= 0.0) gm[i] = 0.0;
            }
        }
        const Tensor& vx2 = t.value(x);
        const Tensor& vw2 = t.value(w);
        if (t.node(x).requires_grad) {
            Tensor dx({rows, in});
            for (std::size_t i = 0; i < rows; ++i) {
                const double* gi = gm.data() + i * out_dim;
                double* di = dx.data() + i * in;
                for (std::size_t o = 0; o < out_dim; ++o) {
                    const double go = gi[o];
                    if (go == 0.0) continue;
                    const double* wo = vw2.data() + o * in;
                    for (std::size_t l = 0; l < in; ++l) di[l] += go * wo[l];
                }
            }
            t.accum(x, dx);
        }
        if (t.node(w).requires_grad) {
            Tensor dw({out_dim, in});
            for (std::size_t i = 0; i < rows; ++i) {
                const double* gi = gm.data() + i * out_dim;
                const double* xi = vx2.data() + i * in;
                for (std::size_t o = 0; o < out_dim; ++o) {
                    const double go = gi[o];
                    if (go == 0.0) continue;
                    double* dwo = dw.data() + o * in;
                    for (std::size_t l = 0; l < in; ++l) dwo[l] += go * xi[l];
                }
            }
            t.accum(w, dw);
        }
        if (t.node(b).requires_grad) {
            Tensor db({out_dim});
            for (std::size_t i = 0; i < rows; ++i) {
                const double* gi = gm.data() + i * out_dim;
                for (std::size_t o = 0; o < out_dim; ++o) db[o] += gi[o];
            }
            t.accum(b, db);
        }
    };
    return result;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var Tape::sum(Var a) {
    Tensor out({1});
    out[0] = value(a).sum();
    return push(std::move(out), node(a).requires_grad, [a](Tape& t, const Tensor& g) {
        Tensor da(t.value(a).shape());
        da.fill(g[0]);
        t.accum(a, da);
    });
}

Var Tape::dot(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw InvalidInput("dot: shape mismatch");
    Tensor out({1});
    double acc = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
    out[0] = acc;
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(out), rg, [a, b](Tape& t, const Tensor& g) {
        if (t.node(a).requires_grad) {
            Tensor da = t.value(b);
            da *= g[0];
            t.accum(a, da);
        }
        if (t.node(b).requires_grad) {
            Tensor db = t.value(a);
            db *= g[0];
            t.accum(b, db);
        }
    });
}

Var Tape::norm2(Var a) {
    const Tensor& va = value(a);
    Tensor out({1});
    double acc = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * va[i];
    out[0] = acc;
    return push(std::move(out), node(a).requires_grad, [a](Tape& t, const Tensor& g) {
        Tensor da = t.value(a);
        da *= 2.0 * g[0];
        t.accum(a, da);
    });
}

Var Tape::logsumexp(Var a) {
    const Tensor& va = value(a);
    Tensor out({1});
    out[0] = stable_lse(va.data(), va.size());
    return push(std::move(out), node(a).requires_grad, [a](Tape& t, const Tensor& g) {
        const Tensor& va2 = t.value(a);
        const double l = stable_lse(va2.data(), va2.size());
        Tensor da(va2.shape());
        for (std::size_t i = 0; i < da.size(); ++i) da[i] = g[0] * std::exp(va2[i] - l);
        t.accum(a, da);
    });
}

Var Tape::lse_rows(Var m) {
    const Tensor& vm = value(m);
    require_rank2(vm, "lse_rows");
    const std::size_t n = vm.rows(), cols = vm.cols();
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) out[i] = stable_lse(vm.data() + i * cols, cols);
    Var result = push(std::move(out), node(m).requires_grad, nullptr);
    node(result).backprop = [m, n, cols, result](Tape& t, const Tensor& g) {
        const Tensor& vm2 = t.value(m);
        const Tensor& lv = t.value(result);
        Tensor dm({n, cols});
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = g[i];
            if (gi == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) {
                dm.at(i, j) = gi * std::exp(vm2.at(i, j) - lv[i]);
            }
        }
        t.accum(m, dm);
    };
    return result;
}

Var Tape::lse_cols(Var m) {
    const Tensor& vm = value(m);
    require_rank2(vm, "lse_cols");
    const std::size_t n = vm.rows(), cols = vm.cols();
    Tensor out({cols});
    std::vector<double> col(n);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = vm.at(i, j);
        out[j] = stable_lse(col.data(), n);
    }
    Var result = push(std::move(out), node(m).requires_grad, nullptr);
    node(result).backprop = [m, n, cols, result](Tape& t, const Tensor& g) {
        const Tensor& vm2 = t.value(m);
        const Tensor& lv = t.value(result);
        Tensor dm({n, cols});
        for (std::size_t j = 0; j < cols; ++j) {
            const double gj = g[j];
            if (gj == 0.0) continue;
            for (std::size_t i = 0; i < n; ++i) {
                dm.at(i, j) = gj * std::exp(vm2.at(i, j) - lv[j]);
            }
        }
        t.accum(m, dm);
    };
    return result;
}

Var Tape::softmax(Var a) {
    const Tensor& va = value(a);
    if (va.rank() != 1) throw InvalidInput("softmax: rank-1 tensor required");
    const double l = stable_lse(va.data(), va.size());
    Tensor out(va.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(va[i] - l);
    Var result = push(std::move(out), node(a).requires_grad, nullptr);
    node(result).backprop = [a, result](Tape& t, const Tensor& g) {
        const Tensor& s = t.value(result);
        double inner = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) inner += g[i] * s[i];
        Tensor da(s.shape());
        for (std::size_t i = 0; i < s.size(); ++i) da[i] = s[i] * (g[i] - inner);
        t.accum(a, da);
    };
    return result;
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

Var Tape::concat(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.rank() != 1 || vb.rank() != 1) throw InvalidInput("concat: rank-1 tensors required");
    std::vector<double> data(va.values());
    data.insert(data.end(), vb.values().begin(), vb.values().end());
    const std::size_t na = va.size();
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(Tensor::vector(std::move(data)), rg, [a, b, na](Tape& t, const Tensor& g) {
        if (t.node(a).requires_grad) {
            Tensor da({na});
            for (std::size_t i = 0; i < na; ++i) da[i] = g[i];
            t.accum(a, da);
        }
        if (t.node(b).requires_grad) {
            const std::size_t nb = g.size() - na;
            Tensor db({nb});
            for (std::size_t i = 0; i < nb; ++i) db[i] = g[na + i];
            t.accum(b, db);
        }
    });
}

namespace {

Tensor concat_cols_values(const Tensor& a, const Tensor& b) {
    const std::size_t n = a.rows(), pa = a.cols(), pb = b.cols();
    Tensor out({n, pa + pb});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(a.data() + i * pa, a.data() + (i + 1) * pa, out.data() + i * (pa + pb));
        std::copy(b.data() + i * pb, b.data() + (i + 1) * pb,
                  out.data() + i * (pa + pb) + pa);
    }
    return out;
}

}  // namespace

Var Tape::concat_cols(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require_rank2(va, "concat_cols lhs");
    require_rank2(vb, "concat_cols rhs");
    if (va.rows() != vb.rows()) throw InvalidInput("concat_cols: row counts differ");
    const std::size_t n = va.rows(), pa = va.cols(), pb = vb.cols();
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(concat_cols_values(va, vb), rg, [a, b, n, pa, pb](Tape& t, const Tensor& g) {
        if (t.node(a).requires_grad) {
            Tensor da({n, pa});
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < pa; ++j) da.at(i, j) = g.at(i, j);
            }
            t.accum(a, da);
        }
        if (t.node(b).requires_grad) {
            Tensor db({n, pb});
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < pb; ++j) db.at(i, j) = g.at(i, pa + j);
            }
            t.accum(b, db);
        }
    });
}

Var Tape::concat_cols_const(Var a, const Tensor& t) {
    const Tensor& va = value(a);
    require_rank2(va, "concat_cols_const lhs");
    require_rank2(t, "concat_cols_const rhs");
    if (va.rows() != t.rows()) throw InvalidInput("concat_cols_const: row counts differ");
    const std::size_t n = va.rows(), pa = va.cols();
    return push(concat_cols_values(va, t), node(a).requires_grad,
                [a, n, pa](Tape& tp, const Tensor& g) {
                    Tensor da({n, pa});
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < pa; ++j) da.at(i, j) = g.at(i, j);
                    }
                    tp.accum(a, da);
                });
}

Var Tape::slice_cols(Var m, std::size_t begin, std::size_t end) {
    const Tensor& vm = value(m);
    require_rank2(vm, "slice_cols");
    if (begin >= end || end > vm.cols()) throw InvalidInput("slice_cols: bad column range");
    const std::size_t n = vm.rows(), w = end - begin, cols = vm.cols();
    Tensor out({n, w});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(vm.data() + i * cols + begin, vm.data() + i * cols + end,
                  out.data() + i * w);
    }
    return push(std::move(out), node(m).requires_grad,
                [m, n, w, cols, begin](Tape& t, const Tensor& g) {
                    Tensor dm({n, cols});
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < w; ++j) dm.at(i, begin + j) = g.at(i, j);
                    }
                    t.accum(m, dm);
                });
}

Var Tape::replicate_row(Var row, std::size_t n) {
    const Tensor& vr = value(row);
    require_rank2(vr, "replicate_row");
    if (vr.rows() != 1) throw InvalidInput("replicate_row: input must have one row");
    const std::size_t q = vr.cols();
    Tensor out({n, q});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(vr.data(), vr.data() + q, out.data() + i * q);
    }
    return push(std::move(out), node(row).requires_grad,
                [row, n, q](Tape& t, const Tensor& g) {
                    Tensor dr({1, q});
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < q; ++j) dr[j] += g.at(i, j);
                    }
                    t.accum(row, dr);
                });
}

Var Tape::tensor_rows(Var x, int order) {
    const Tensor& vx = value(x);
    require_rank2(vx, "tensor_rows");
    if (order < 1) throw InvalidInput("tensor_rows: order must be >= 1");
    const std::size_t n = vx.rows(), q = vx.cols();
    std::size_t rows = 1;
    for (int k = 0; k < order; ++k) {
        if (rows > 10'000'000 / std::max<std::size_t>(n, 1)) {
            throw ResourceLimit("tensor_rows: too many rows");
        }
        rows *= n;
    }
    const std::size_t ord = static_cast<std::size_t>(order);
    Tensor out({rows, ord * q});
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t rest = r;
        // decode i_1-major multi-index: last slot varies fastest
        for (std::size_t s = ord; s-- > 0;) {
            const std::size_t idx = rest % n;
            rest /= n;
            std::copy(vx.data() + idx * q, vx.data() + (idx + 1) * q,
                      out.data() + r * (ord * q) + s * q);
        }
    }
    return push(std::move(out), node(x).requires_grad,
                [x, n, q, ord, rows](Tape& t, const Tensor& g) {
                    Tensor dx({n, q});
                    for (std::size_t r = 0; r < rows; ++r) {
                        std::size_t rest = r;
                        for (std::size_t s = ord; s-- > 0;) {
                            const std::size_t idx = rest % n;
                            rest /= n;
                            const double* gr = g.data() + r * (ord * q) + s * q;
                            double* dr = dx.data() + idx * q;
                            for (std::size_t j = 0; j < q; ++j) dr[j] += gr[j];
                        }
                    }
                    t.accum(x, dx);
                });
}

Var Tape::take_rows(Var x, std::vector<std::size_t> rows) {
    const Tensor& vx = value(x);
    require_rank2(vx, "take_rows");
    const std::size_t q = vx.cols(), n = vx.rows();
    Tensor out({rows.size(), q});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= n) throw InvalidInput("take_rows: index out of range");
        std::copy(vx.data() + rows[r] * q, vx.data() + (rows[r] + 1) * q,
                  out.data() + r * q);
    }
    return push(std::move(out), node(x).requires_grad,
                [x, rows = std::move(rows), n, q](Tape& t, const Tensor& g) {
                    Tensor dx({n, q});
                    for (std::size_t r = 0; r < rows.size(); ++r) {
                        double* dr = dx.data() + rows[r] * q;
                        const double* gr = g.data() + r * q;
                        for (std::size_t j = 0; j < q; ++j) dr[j] += gr[j];
                    }
                    t.accum(x, dx);
                });
}

Var Tape::group_avg_rows(Var f, std::vector<double> w) {
    const Tensor& vf = value(f);
    require_rank2(vf, "group_avg_rows");
    const std::size_t g_size = w.size();
    if (g_size == 0 || vf.rows() % g_size != 0) {
        throw InvalidInput("group_avg_rows: rows not divisible by group size");
    }
    const std::size_t n = vf.rows() / g_size, r = vf.cols();
    Tensor out({n, r});
    for (std::size_t i = 0; i < n; ++i) {
        double* oi = out.data() + i * r;
        for (std::size_t j = 0; j < g_size; ++j) {
            const double wj = w[j];
            const double* fr = vf.data() + (i * g_size + j) * r;
            for (std::size_t k = 0; k < r; ++k) oi[k] += wj * fr[k];
        }
    }
    return push(std::move(out), node(f).requires_grad,
                [f, w = std::move(w), n, r](Tape& t, const Tensor& g) {
                    const std::size_t g_size = w.size();
                    Tensor df({n * g_size, r});
                    for (std::size_t i = 0; i < n; ++i) {
                        const double* gi = g.data() + i * r;
                        for (std::size_t j = 0; j < g_size; ++j) {
                            double* dr = df.data() + (i * g_size + j) * r;
                            for (std::size_t k = 0; k < r; ++k) dr[k] = w[j] * gi[k];
                        }
                    }
                    t.accum(f, df);
                });
}

Var Tape::avg_rows(Var f, std::vector<double> w) {
    const Tensor& vf = value(f);
    require_rank2(vf, "avg_rows");
    if (w.size() != vf.rows()) throw InvalidInput("avg_rows: weight count mismatch");
    const std::size_t n = vf.rows(), r = vf.cols();
    Tensor out({1, r});
    for (std::size_t i = 0; i < n; ++i) {
        const double* fr = vf.data() + i * r;
        for (std::size_t k = 0; k < r; ++k) out[k] += w[i] * fr[k];
    }
    return push(std::move(out), node(f).requires_grad,
                [f, w = std::move(w), n, r](Tape& t, const Tensor& g) {
                    Tensor df({n, r});
                    for (std::size_t i = 0; i < n; ++i) {
                        double* dr = df.data() + i * r;
                        for (std::size_t k = 0; k < r; ++k) dr[k] = w[i] * g[k];
                    }
                    t.accum(f, df);
                });
}

Var Tape::weighted_sum(std::span<const Var> xs, std::span<const double> w) {
    if (xs.empty() || xs.size() != w.size()) {
        throw InvalidInput("weighted_sum: need matching nonempty spans");
    }
    Tensor out(value(xs[0]).shape());
    bool rg = false;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const Tensor& v = value(xs[k]);
        if (!v.same_shape(out)) throw InvalidInput("weighted_sum: shape mismatch");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * v[i];
        rg = rg || node(xs[k]).requires_grad;
    }
    std::vector<Var> xs_copy(xs.begin(), xs.end());
    std::vector<double> w_copy(w.begin(), w.end());
    return push(std::move(out), rg,
                [xs = std::move(xs_copy), w = std::move(w_copy)](Tape& t, const Tensor& g) {
                    for (std::size_t k = 0; k < xs.size(); ++k) {
                        if (!t.node(xs[k]).requires_grad) continue;
                        Tensor d = g;
                        d *= w[k];
                        t.accum(xs[k], d);
                    }
                });
}

// ---------------------------------------------------------------------------
// broadcast
// ---------------------------------------------------------------------------

Var Tape::add_rowvec(Var m, Var v) {
    const Tensor& vm = value(m);
    const Tensor& vv = value(v);
    require_rank2(vm, "add_rowvec");
    if (vv.rank() != 1 || vv.size() != vm.cols()) throw InvalidInput("add_rowvec: bad vector");
    const std::size_t n = vm.rows(), cols = vm.cols();
    Tensor out = vm;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cols; ++j) out.at(i, j) += vv[j];
    }
    const bool rg = node(m).requires_grad || node(v).requires_grad;
    return push(std::move(out), rg, [m, v, n, cols](Tape& t, const Tensor& g) {
        t.accum(m, g);
        if (t.node(v).requires_grad) {
            Tensor dv({cols});
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < cols; ++j) dv[j] += g.at(i, j);
            }
            t.accum(v, dv);
        }
    });
}

Var Tape::add_colvec(Var m, Var v) {
    const Tensor& vm = value(m);
    const Tensor& vv = value(v);
    require_rank2(vm, "add_colvec");
    if (vv.rank() != 1 || vv.size() != vm.rows()) throw InvalidInput("add_colvec: bad vector");
    const std::size_t n = vm.rows(), cols = vm.cols();
    Tensor out = vm;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cols; ++j) out.at(i, j) += vv[i];
    }
    const bool rg = node(m).requires_grad || node(v).requires_grad;
    return push(std::move(out), rg, [m, v, n, cols](Tape& t, const Tensor& g) {
        t.accum(m, g);
        if (t.node(v).requires_grad) {
            Tensor dv({n});
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < cols; ++j) dv[i] += g.at(i, j);
            }
            t.accum(v, dv);
        }
    });
}

// ---------------------------------------------------------------------------
// losses / transport
// ---------------------------------------------------------------------------

Var Tape::pairwise_cost(Var x, Var y, int p) {
    if (p != 1 && p != 2) throw InvalidInput("pairwise_cost: p must be 1 or 2");
    const Tensor& vx = value(x);
    const Tensor& vy = value(y);
    require_rank2(vx, "pairwise_cost lhs");
    require_rank2(vy, "pairwise_cost rhs");
    if (vx.cols() != vy.cols()) throw InvalidInput("pairwise_cost: dimension mismatch");
    const std::size_t n = vx.rows(), m = vy.rows(), d = vx.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = vx.data() + i * d;
        for (std::size_t j = 0; j < m; ++j) {
            const double* yj = vy.data() + j * d;
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = xi[k] - yj[k];
                sq += diff * diff;
            }
            out.at(i, j) = (p == 2) ? sq : std::sqrt(sq);
        }
    }
    const bool rg = node(x).requires_grad || node(y).requires_grad;
    return push(std::move(out), rg, [x, y, p, n, m, d](Tape& t, const Tensor& g) {
        const Tensor& vx2 = t.value(x);
        const Tensor& vy2 = t.value(y);
        const bool need_x = t.node(x).requires_grad;
        const bool need_y = t.node(y).requires_grad;
        Tensor dx({n, d}), dy({m, d});
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = vx2.data() + i * d;
            for (std::size_t j = 0; j < m; ++j) {
                const double gij = g.at(i, j);
                if (gij == 0.0) continue;
                const double* yj = vy2.data() + j * d;
                double factor;
                if (p == 2) {
                    factor = 2.0 * gij;
                } else {
                    double sq = 0.0;
                    for (std::size_t k = 0; k < d; ++k) {
                        const double diff = xi[k] - yj[k];
                        sq += diff * diff;
                    }
                    const double dist = std::sqrt(sq);
                    if (dist < 1e-30) continue;  // subgradient 0 at coincident points
                    factor = gij / dist;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = xi[k] - yj[k];
                    if (need_x) dx.data()[i * d + k] += factor * diff;
                    if (need_y) dy.data()[j * d + k] -= factor * diff;
                }
            }
        }
        if (need_x) t.accum(x, dx);
        if (need_y) t.accum(y, dy);
    });
}

Var Tape::cross_entropy(Var scores, int label, double weight) {
    const Tensor& vs = value(scores);
    const std::size_t classes = vs.size();
    if (vs.rank() > 2 || (vs.rank() == 2 && vs.rows() != 1)) {
        throw InvalidInput("cross_entropy: scores must be a vector");
    }
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
        throw InvalidInput("cross_entropy: label " + std::to_string(label) + " out of range");
    }
    const double l = stable_lse(vs.data(), classes);
    Tensor out({1});
    out[0] = weight * (l - vs[static_cast<std::size_t>(label)]);
    return push(std::move(out), node(scores).requires_grad,
                [scores, label, weight](Tape& t, const Tensor& g) {
                    const Tensor& vs2 = t.value(scores);
                    const double l2 = stable_lse(vs2.data(), vs2.size());
                    Tensor ds(vs2.shape());
                    for (std::size_t i = 0; i < vs2.size(); ++i) {
                        ds[i] = g[0] * weight * std::exp(vs2[i] - l2);
                    }
                    ds[static_cast<std::size_t>(label)] -= g[0] * weight;
                    t.accum(scores, ds);
                });
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Tape::backward(Var root) {
    if (backward_done_) throw InvalidInput("Tape: backward already ran on this tape");
    Node& r = node(root);
    if (r.value.size() != 1) throw InvalidInput("backward: root must be scalar");
    backward_done_ = true;
    if (!r.requires_grad) return;  // no parameters involved
    grad_buf(root)[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.grad_live || !n.backprop) continue;
        n.backprop(*this, n.grad);
    }
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const TapeProgram& program, const std::vector<Tensor>& params,
                           double h, double tol, int max_coords, std::uint64_t seed) {
    // Reverse-mode gradients.
    std::vector<Tensor> ad_grads;
    {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(params.size());
        for (const auto& p : params) vars.push_back(tape.param(p));
        Var root = program(tape, vars);
        tape.backward(root);
        for (const auto& v : vars) ad_grads.push_back(tape.grad(v));
    }

    const auto eval = [&](const std::vector<Tensor>& values) {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(values.size());
        for (const auto& p : values) vars.push_back(tape.param(p));
        Var root = program(tape, vars);
        return tape.value(root)[0];
    };

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k].size(); ++i) coords.emplace_back(k, i);
    }
    if (max_coords >= 0 && coords.size() > static_cast<std::size_t>(max_coords)) {
        SeededRng rng(seed);
        // Partial Fisher-Yates: the first max_coords entries become the sample.
        for (std::size_t i = 0; i < static_cast<std::size_t>(max_coords); ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.next_u64() % (coords.size() - i));
            std::swap(coords[i], coords[j]);
        }
        coords.resize(static_cast<std::size_t>(max_coords));
    }

    GradCheckReport report;
    std::vector<Tensor> probe = params;
    for (const auto& [k, i] : coords) {
        const double saved = probe[k][i];
        probe[k][i] = saved + h;
        const double above = eval(probe);
        probe[k][i] = saved - h;
        const double below = eval(probe);
        probe[k][i] = saved;
        if (!std::isfinite(above) || !std::isfinite(below)) {
            throw EvaluationError("grad_check: non-finite loss during probing");
        }
        const double fd = (above - below) / (2.0 * h);
        const double ad = ad_grads[k][i];
        const double denom = std::max({1.0, std::abs(ad), std::abs(fd)});
        report.max_rel_error = std::max(report.max_rel_error, std::abs(ad - fd) / denom);
    }
    report.coords_checked = coords.size();
    report.pass = report.max_rel_error < tol;
    return report;
}

}  // namespace sdn
