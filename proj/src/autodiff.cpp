#include "netsight/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace netsight {

namespace {

Tape& check_same_tape(Var a, Var b) {
    require(a.tape != nullptr && a.tape == b.tape, "variables belong to different tapes");
    return *a.tape;
}

Tensor like(const Tensor& t) { return t.clone_value(); }

}  // namespace

Var Tape::emplace(Tensor value, std::function<void(Tape&)> back) {
    if (consumed_) throw std::logic_error("tape already consumed by backward");
    nodes_.push_back(Node{std::move(value), std::move(back)});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::set_back(Var v, std::function<void(Tape&)> back) {
    nodes_[static_cast<size_t>(v.idx)].back = std::move(back);
}

Var Tape::constant(Tensor value) { return emplace(std::move(value), nullptr); }

Matrix Tape::grad_of(Var v) const {
    const Tensor& t = nodes_[static_cast<size_t>(v.idx)].value;
    if (!t.has_grad()) return Matrix::Zero(t.rows(), t.cols());
    return t.grad_mat();
}

void Tape::backward(Var root) {
    if (consumed_) throw std::logic_error("tape already consumed by backward");
    require(root.tape == this, "root from another tape");
    Tensor& r = nodes_[static_cast<size_t>(root.idx)].value;
    require(r.size() == 1, "backward requires a scalar root");
    r.grad_flat()(0) = 1.0;
    // Construction order is topological, so reverse index order is exact
    // reverse topological order. Nodes no gradient ever reached are skipped.
    for (int i = root.idx; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.back && n.value.has_grad()) n.back(*this);
    }
    consumed_ = true;
}

// ---------------------------------------------------------------------------
// Elementwise operations
// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
    Tape& t = check_same_tape(a, b);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require(av.same_shape(bv), "add: shape mismatch");
    Tensor out = like(av);
    out.flat() = av.flat() + bv.flat();
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [ai = a.idx, bi = b.idx, oi = o.idx](Tape& tp) {
        auto g = tp.node(oi).grad_flat();
        tp.node(ai).grad_flat() += g;
        tp.node(bi).grad_flat() += g;
    });
    return o;
}

Var sub(Var a, Var b) {
    Tape& t = check_same_tape(a, b);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require(av.same_shape(bv), "sub: shape mismatch");
    Tensor out = like(av);
    out.flat() = av.flat() - bv.flat();
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [ai = a.idx, bi = b.idx, oi = o.idx](Tape& tp) {
        auto g = tp.node(oi).grad_flat();
        tp.node(ai).grad_flat() += g;
        tp.node(bi).grad_flat() -= g;
    });
    return o;
}

Var hadamard(Var a, Var b) {
    Tape& t = check_same_tape(a, b);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require(av.same_shape(bv), "hadamard: shape mismatch");
    Tensor out = like(av);
    out.flat() = av.flat() * bv.flat();
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [ai = a.idx, bi = b.idx, oi = o.idx](Tape& tp) {
        auto g = tp.node(oi).grad_flat();
        tp.node(ai).grad_flat() += g * tp.node(bi).flat();
        tp.node(bi).grad_flat() += g * tp.node(ai).flat();
    });
    return o;
}

Var scale(Var a, Scalar c) {
    Tape& t = *a.tape;
    Tensor out = like(t.value(a));
    out.flat() = c * t.value(a).flat();
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [ai = a.idx, oi = o.idx, c](Tape& tp) {
        tp.node(ai).grad_flat() += c * tp.node(oi).grad_flat();
    });
    return o;
}

Var relu(Var a) {
    Tape& t = *a.tape;
    Tensor out = like(t.value(a));
    out.flat() = t.value(a).flat().max(0.0);
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [ai = a.idx, oi = o.idx](Tape& tp) {
        auto x = tp.node(ai).flat();
        tp.node(ai).grad_flat() += tp.node(oi).grad_flat() * (x > 0.0).cast<Scalar>();
    });
    return o;
}

Var leaky_relu(Var a, Scalar slope) {
    Tape& t = *a.tape;
    Tensor out = like(t.value(a));
    auto x = t.value(a).flat();
    out.flat() = (x > 0.0).select(x, slope * x);
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [ai = a.idx, oi = o.idx, slope](Tape& tp) {
        auto x = tp.node(ai).flat();
        auto g = tp.node(oi).grad_flat();
        tp.node(ai).grad_flat() += (x > 0.0).select(g, slope * g);
    });
    return o;
}

// ---------------------------------------------------------------------------
// Matrix operations
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
    Tape& t = check_same_tape(a, b);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require(av.rank() <= 2 && bv.rank() <= 2, "matmul: rank must be <= 2");
    require(av.cols() == bv.rows(), "matmul: inner dimensions disagree");
    Tensor out = Tensor::zeros({av.rows(), bv.cols()});
    out.mat() = av.mat() * bv.mat();
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [ai = a.idx, bi = b.idx, oi = o.idx](Tape& tp) {
        auto g = tp.node(oi).grad_mat();
        tp.node(ai).grad_mat() += g * tp.node(bi).mat().transpose();
        tp.node(bi).grad_mat() += tp.node(ai).mat().transpose() * g;
    });
    return o;
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    require(av.rank() <= 2, "transpose: rank must be <= 2");
    Tensor out = Tensor::zeros({av.cols(), av.rows()});
    out.mat() = av.mat().transpose();
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [ai = a.idx, oi = o.idx](Tape& tp) {
        tp.node(ai).grad_mat() += tp.node(oi).grad_mat().transpose();
    });
    return o;
}

Var add_row_vector(Var x, Var b) {
    Tape& t = check_same_tape(x, b);
    const Tensor& xv = t.value(x);
    const Tensor& bv = t.value(b);
    require(xv.rank() <= 2 && bv.rows() == 1 && bv.cols() == xv.cols(),
            "add_row_vector: bias must be 1×cols");
    Tensor out = like(xv);
    const Eigen::RowVectorXd brow = bv.mat().row(0);
    out.mat() = xv.mat().rowwise() + brow;
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [xi = x.idx, bi = b.idx, oi = o.idx](Tape& tp) {
        auto g = tp.node(oi).grad_mat();
        tp.node(xi).grad_mat() += g;
        tp.node(bi).grad_mat() += g.colwise().sum();
    });
    return o;
}

Var vstack(const std::vector<Var>& parts) {
    require(!parts.empty(), "vstack: no parts");
    Tape& t = *parts.front().tape;
    Eigen::Index rows = 0;
    const Eigen::Index cols = t.value(parts.front()).cols();
    for (Var p : parts) {
        require(p.tape == &t, "vstack: mixed tapes");
        require(t.value(p).rank() <= 2 && t.value(p).cols() == cols, "vstack: column mismatch");
        rows += t.value(p).rows();
    }
    Tensor out = Tensor::zeros({rows, cols});
    Eigen::Index r = 0;
    std::vector<int> idxs;
    std::vector<Eigen::Index> offs;
    for (Var p : parts) {
        const Eigen::Index pr = t.value(p).rows();
        out.mat().middleRows(r, pr) = t.value(p).mat();
        idxs.push_back(p.idx);
        offs.push_back(r);
        r += pr;
    }
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [idxs, offs, oi = o.idx](Tape& tp) {
        auto g = tp.node(oi).grad_mat();
        for (size_t k = 0; k < idxs.size(); ++k) {
            Tensor& in = tp.node(idxs[k]);
            in.grad_mat() += g.middleRows(offs[k], in.rows());
        }
    });
    return o;
}

Var hstack(const std::vector<Var>& parts) {
    require(!parts.empty(), "hstack: no parts");
    Tape& t = *parts.front().tape;
    Eigen::Index cols = 0;
    const Eigen::Index rows = t.value(parts.front()).rows();
    for (Var p : parts) {
        require(p.tape == &t, "hstack: mixed tapes");
        require(t.value(p).rank() <= 2 && t.value(p).rows() == rows, "hstack: row mismatch");
        cols += t.value(p).cols();
    }
    Tensor out = Tensor::zeros({rows, cols});
    Eigen::Index c = 0;
    std::vector<int> idxs;
    std::vector<Eigen::Index> offs;
    for (Var p : parts) {
        const Eigen::Index pc = t.value(p).cols();
        out.mat().middleCols(c, pc) = t.value(p).mat();
        idxs.push_back(p.idx);
        offs.push_back(c);
        c += pc;
    }
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [idxs, offs, oi = o.idx](Tape& tp) {
        auto g = tp.node(oi).grad_mat();
        for (size_t k = 0; k < idxs.size(); ++k) {
            Tensor& in = tp.node(idxs[k]);
            in.grad_mat() += g.middleCols(offs[k], in.cols());
        }
    });
    return o;
}

Var slice_rows(Var x, Eigen::Index first, Eigen::Index count) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    require(xv.rank() <= 2, "slice_rows: rank must be <= 2");
    require(first >= 0 && count >= 1 && first + count <= xv.rows(), "slice_rows: out of range");
    Tensor out = Tensor::zeros({count, xv.cols()});
    out.mat() = xv.mat().middleRows(first, count);
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [xi = x.idx, oi = o.idx, first, count](Tape& tp) {
        tp.node(xi).grad_mat().middleRows(first, count) += tp.node(oi).grad_mat();
    });
    return o;
}

// ---------------------------------------------------------------------------
// Softmax (flat, row-wise and masked row-wise share one kernel; row-major
// storage makes a row a contiguous flat range)
// ---------------------------------------------------------------------------

namespace {

Var softmax_impl(Var x, Var mask, bool has_mask, bool rowwise) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    require(xv.rank() <= 2 && xv.size() >= 1, "softmax: need at least one entry");
    if (has_mask) {
        const Tensor& mv = t.value(mask);
        require(mv.rows() == xv.rows() && mv.cols() == xv.cols(), "softmax: mask shape mismatch");
    }
    const Eigen::Index cols = rowwise ? xv.cols() : xv.size();
    const Eigen::Index nslices = rowwise ? xv.rows() : 1;
    const Tensor* mv = has_mask ? &t.value(mask) : nullptr;
    Tensor out = like(xv);
    for (Eigen::Index s = 0; s < nslices; ++s) {
        const Eigen::Index base = s * cols;
        Scalar mx = -std::numeric_limits<Scalar>::infinity();
        bool any = false;
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (mv && mv->flat()(base + c) == 0.0) continue;
            any = true;
            mx = std::max(mx, xv.flat()(base + c));
        }
        if (!any) throw DimensionError("softmax: empty support in row " + std::to_string(s));
        Scalar denom = 0.0;
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (mv && mv->flat()(base + c) == 0.0) {
                out.flat()(base + c) = 0.0;
                continue;
            }
            const Scalar e = std::exp(xv.flat()(base + c) - mx);
            out.flat()(base + c) = e;
            denom += e;
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (mv && mv->flat()(base + c) == 0.0) continue;
            out.flat()(base + c) /= denom;
        }
    }
    Var o = t.emplace(std::move(out), nullptr);
    const int mask_idx = has_mask ? mask.idx : -1;
    t.set_back(o, [xi = x.idx, oi = o.idx, mask_idx, cols, nslices](Tape& tp) {
        const Tensor& y = tp.node(oi);
        auto g = tp.node(oi).grad_flat();
        auto gx = tp.node(xi).grad_flat();
        const Tensor* mv = mask_idx >= 0 ? &tp.node(mask_idx) : nullptr;
        for (Eigen::Index s = 0; s < nslices; ++s) {
            const Eigen::Index base = s * cols;
            Scalar dot = 0.0;
            for (Eigen::Index c = 0; c < cols; ++c) {
                if (mv && mv->flat()(base + c) == 0.0) continue;
                dot += g(base + c) * y.flat()(base + c);
            }
            for (Eigen::Index c = 0; c < cols; ++c) {
                if (mv && mv->flat()(base + c) == 0.0) continue;
                gx(base + c) += y.flat()(base + c) * (g(base + c) - dot);
            }
        }
    });
    return o;
}

}  // namespace

Var softmax(Var v) { return softmax_impl(v, Var{}, false, /*rowwise=*/false); }

Var row_softmax(Var x) { return softmax_impl(x, Var{}, false, /*rowwise=*/true); }

Var masked_row_softmax(Var x, Var mask) {
    check_same_tape(x, mask);
    return softmax_impl(x, mask, true, /*rowwise=*/true);
}

// ---------------------------------------------------------------------------
// Normalizations
// ---------------------------------------------------------------------------

namespace {

// Backward of z = (x − μ)/max(σ, eps) over one slice, given dz. When the σ
// floor is active the denominator is a constant.
void standardize_backward(const Matrix& z, Scalar sigma, Scalar eps, const Matrix& dz,
                          MatMap gx, Eigen::Index row0) {
    const Scalar n = static_cast<Scalar>(z.size());
    const Scalar mean_dz = dz.sum() / n;
    if (sigma > eps) {
        const Scalar mean_dz_z = (dz.array() * z.array()).sum() / n;
        gx.middleRows(row0, z.rows()).array() +=
            (dz.array() - mean_dz - z.array() * mean_dz_z) / sigma;
    } else {
        gx.middleRows(row0, z.rows()).array() += (dz.array() - mean_dz) / eps;
    }
}

}  // namespace

Var layer_norm(Var x, Var gamma, Var beta, Scalar eps) {
    Tape& t = *x.tape;
    require(gamma.tape == &t && beta.tape == &t, "layer_norm: mixed tapes");
    const Tensor& xv = t.value(x);
    const Tensor& gv = t.value(gamma);
    const Tensor& bv = t.value(beta);
    require(xv.rank() <= 2 && xv.cols() >= 1, "layer_norm: rank must be <= 2");
    require(gv.rows() == 1 && gv.cols() == xv.cols(), "layer_norm: gamma must be 1×f");
    require(bv.rows() == 1 && bv.cols() == xv.cols(), "layer_norm: beta must be 1×f");
    const Eigen::Index rows = xv.rows(), f = xv.cols();
    Matrix z(rows, f);
    Eigen::VectorXd sigmas(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Scalar mu = xv.mat().row(r).mean();
        const Scalar var = (xv.mat().row(r).array() - mu).square().sum() / static_cast<Scalar>(f);
        const Scalar sigma = std::sqrt(var);
        sigmas(r) = sigma;
        z.row(r) = (xv.mat().row(r).array() - mu) / std::max(sigma, eps);
    }
    Tensor out = like(xv);
    for (Eigen::Index r = 0; r < rows; ++r)
        out.mat().row(r) =
            z.row(r).array() * gv.mat().row(0).array() + bv.mat().row(0).array();
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o,
               [xi = x.idx, gi = gamma.idx, bi = beta.idx, oi = o.idx, z, sigmas, eps](Tape& tp) {
                   auto g = tp.node(oi).grad_mat();
                   tp.node(gi).grad_mat() += (g.array() * z.array()).colwise().sum().matrix();
                   tp.node(bi).grad_mat() += g.colwise().sum();
                   auto gx = tp.node(xi).grad_mat();
                   const Tensor& gammat = tp.node(gi);
                   for (Eigen::Index r = 0; r < z.rows(); ++r) {
                       Matrix dz = (g.row(r).array() * gammat.mat().row(0).array()).matrix();
                       Matrix zr = z.row(r);
                       standardize_backward(zr, sigmas(r), eps, dz, gx, r);
                   }
               });
    return o;
}

Var normalize_entries(Var x, Scalar eps) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    require(xv.rank() <= 2 && xv.size() >= 1, "normalize_entries: need entries");
    const Scalar n = static_cast<Scalar>(xv.size());
    const Scalar mu = xv.flat().sum() / n;
    const Scalar sigma = std::sqrt((xv.flat() - mu).square().sum() / n);
    Tensor out = like(xv);
    out.flat() = (xv.flat() - mu) / std::max(sigma, eps);
    Matrix z = out.mat();
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [xi = x.idx, oi = o.idx, z, sigma, eps](Tape& tp) {
        Matrix g = tp.node(oi).grad_mat();
        auto gx = tp.node(xi).grad_mat();
        standardize_backward(z, sigma, eps, g, gx, 0);
    });
    return o;
}

Var mul_scalar(Var x, Var s) {
    Tape& t = check_same_tape(x, s);
    require(t.value(s).size() == 1, "mul_scalar: s must be 1×1");
    const Scalar sv = t.value(s).flat()(0);
    Tensor out = like(t.value(x));
    out.flat() = sv * t.value(x).flat();
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [xi = x.idx, si = s.idx, oi = o.idx](Tape& tp) {
        auto g = tp.node(oi).grad_flat();
        const Scalar sv = tp.node(si).flat()(0);
        tp.node(xi).grad_flat() += sv * g;
        tp.node(si).grad_flat()(0) += (g * tp.node(xi).flat()).sum();
    });
    return o;
}

Var add_scalar(Var x, Var m) {
    Tape& t = check_same_tape(x, m);
    require(t.value(m).size() == 1, "add_scalar: m must be 1×1");
    Tensor out = like(t.value(x));
    out.flat() = t.value(x).flat() + t.value(m).flat()(0);
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [xi = x.idx, mi = m.idx, oi = o.idx](Tape& tp) {
        auto g = tp.node(oi).grad_flat();
        tp.node(xi).grad_flat() += g;
        tp.node(mi).grad_flat()(0) += g.sum();
    });
    return o;
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

Var sum_all(Var x) {
    Tape& t = *x.tape;
    Tensor out = Tensor::scalar(t.value(x).flat().sum());
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [xi = x.idx, oi = o.idx](Tape& tp) {
        tp.node(xi).grad_flat() += tp.node(oi).grad_flat()(0);
    });
    return o;
}

Var mean_all(Var x) {
    Tape& t = *x.tape;
    const Scalar n = static_cast<Scalar>(t.value(x).size());
    Tensor out = Tensor::scalar(t.value(x).flat().sum() / n);
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [xi = x.idx, oi = o.idx, n](Tape& tp) {
        tp.node(xi).grad_flat() += tp.node(oi).grad_flat()(0) / n;
    });
    return o;
}

Var huber_loss(Var pred, const Tensor& target, Scalar delta) {
    Tape& t = *pred.tape;
    const Tensor& pv = t.value(pred);
    require(delta > 0.0, "huber_loss: delta must be positive");
    require(pv.same_shape(target), "huber_loss: shape mismatch");
    const Scalar n = static_cast<Scalar>(pv.size());
    Eigen::Array<Scalar, Eigen::Dynamic, 1> r = pv.flat() - target.flat();
    Scalar total = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const Scalar a = std::abs(r(i));
        total += a <= delta ? 0.5 * r(i) * r(i) : delta * (a - 0.5 * delta);
    }
    Tensor out = Tensor::scalar(total / n);
    Var o = t.emplace(std::move(out), nullptr);
    t.set_back(o, [pi = pred.idx, oi = o.idx, r, delta, n](Tape& tp) {
        const Scalar g = tp.node(oi).grad_flat()(0);
        tp.node(pi).grad_flat() += (g / n) * r.max(-delta).min(delta);
    });
    return o;
}

Var linear(Var x, Var w) { return matmul(x, w); }

Var linear(Var x, Var w, Var b) { return add_row_vector(matmul(x, w), b); }

}  // namespace netsight
