#include "mmcrf/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "mmcrf/errors.hpp"
#include "mmcrf/kernels.hpp"

namespace mmcrf {

int Tape::push(OpKind kind, int n) {
    Op op;
    op.kind = kind;
    op.out = static_cast<int>(vals_.grow(n));
    op.n = n;
    ops_.push_back(op);
    return static_cast<int>(ops_.size()) - 1;
}

Tape::Ref Tape::constant(std::span<const double> v) {
    const int id = push(OpKind::Const, static_cast<int>(v.size()));
    std::memcpy(out_ptr(id), v.data(), v.size() * sizeof(double));
    return {id};
}

Tape::Ref Tape::zeros(int n) {
    const int id = push(OpKind::Const, n);
    std::memset(out_ptr(id), 0, std::size_t(n) * sizeof(double));
    return {id};
}

Tape::Ref Tape::param(int block_id, std::span<const double> v) {
    const int id = push(OpKind::Param, static_cast<int>(v.size()));
    std::memcpy(out_ptr(id), v.data(), v.size() * sizeof(double));
    ops_[id].aux = block_id;
    param_ids_.push_back(block_id);
    param_ops_.push_back(id);
    return {id};
}

Tape::Ref Tape::matvec(Ref w, int rows, int cols, std::span<const double> x) {
    if (static_cast<int>(x.size()) != cols || ops_[w.op].n != rows * cols)
        throw DataError("tape matvec: dimension mismatch");
    const int xoff = static_cast<int>(pool_d_.size());
    pool_d_.insert(pool_d_.end(), x.begin(), x.end());
    const int id = push(OpKind::Matvec, rows);
    Op& op = ops_[id];
    op.a = w.op;
    op.rows = rows;
    op.cols = cols;
    op.aux = xoff;
    kernels::active().matvec(out_ptr(w.op), pool_d_.data() + xoff, out_ptr(id),
                             rows, cols);
    return {id};
}

Tape::Ref Tape::weighted_sum(std::span<const Ref> terms,
                             std::span<const double> coefs) {
    const int n = ops_[terms[0].op].n;
    const int aux = static_cast<int>(pool_i_.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
        pool_i_.push_back(terms[k].op);
        pool_d_.push_back(coefs[k]);
    }
    const int daux = static_cast<int>(pool_d_.size() - terms.size());
    const int id = push(OpKind::WeightedSum, n);
    Op& op = ops_[id];
    op.aux = aux;
    op.b = daux;
    op.aux_n = static_cast<int>(terms.size());
    const auto& k = kernels::active();
    k.scale_copy(pool_d_[daux], out_ptr(pool_i_[aux]), out_ptr(id), n);
    for (int t = 1; t < op.aux_n; ++t)
        k.axpy(pool_d_[daux + t], out_ptr(pool_i_[aux + t]), out_ptr(id), n);
    return {id};
}

Tape::Ref Tape::latent_table(Ref same, Ref cut, std::span<const int> compat_row,
                             int l_node, int l_latent, double penalty,
                             bool cuttable) {
    const int aux = static_cast<int>(pool_i_.size());
    pool_i_.insert(pool_i_.end(), compat_row.begin(), compat_row.end());
    const int cols = l_latent + 1;
    const int id = push(OpKind::LatentTable, l_node * cols);
    Op& op = ops_[id];
    op.a = same.op;
    op.b = cut.op;
    op.rows = l_node;
    op.cols = cols;
    op.aux = aux;
    op.flag = cuttable;
    double* t = out_ptr(id);
    const double* sv = out_ptr(same.op);
    const double* cv = out_ptr(cut.op);
    for (int i = 0; i < l_node * cols; ++i)
        t[i] = penalty;
    if (cuttable)
        for (int l = 1; l <= l_node; ++l)
            t[(l - 1) * cols] = cv[l - 1];
    for (int s = 1; s <= l_latent; ++s) {
        const int l = pool_i_[aux + s - 1];
        if (l > 0)
            t[(l - 1) * cols + s] = sv[s - 1];
    }
    return {id};
}

Tape::Ref Tape::edge_lse(Ref table, Ref pre, int rows, int cols, double scale,
                         bool reduce_rows) {
    const int n = reduce_rows ? cols : rows;
    const int id = push(OpKind::EdgeLse, n);
    Op& op = ops_[id];
    op.a = table.op;
    op.b = pre.op;
    op.rows = rows;
    op.cols = cols;
    op.scale = scale;
    op.flag = reduce_rows;
    const double* t = out_ptr(table.op);
    const double* pv = out_ptr(pre.op);
    double* out = out_ptr(id);
    const auto& k = kernels::active();
    if (static_cast<int>(scratch_row_.size()) < cols) {
        scratch_row_.resize(cols);
        scratch_max_.resize(cols);
        scratch_sum_.resize(cols);
    }
    double* row = scratch_row_.data();
    if (reduce_rows) {
        double* acc_max = scratch_max_.data();
        double* acc_sum = scratch_sum_.data();
        std::fill(acc_max, acc_max + cols,
                  -std::numeric_limits<double>::infinity());
        std::fill(acc_sum, acc_sum + cols, 0.0);
        for (int i = 0; i < rows; ++i) {
            k.scale_add_scalar(scale, t + std::size_t(i) * cols, pv[i], row,
                               cols);
            k.lse_stream(row, acc_max, acc_sum, cols);
        }
        for (int j = 0; j < cols; ++j)
            out[j] = acc_max[j] + std::log(acc_sum[j]);
    } else {
        for (int i = 0; i < rows; ++i) {
            k.scale_add_vec(scale, t + std::size_t(i) * cols, pv, row, cols);
            out[i] = k.lse(row, cols);
        }
    }
    return {id};
}

Tape::Ref Tape::sub_max(Ref x) {
    const int n = ops_[x.op].n;
    const int id = push(OpKind::SubMax, n);
    ops_[id].a = x.op;
    const auto& k = kernels::active();
    const double m = k.vmax(out_ptr(x.op), n);
    k.scale_add_scalar(1.0, out_ptr(x.op), -m, out_ptr(id), n);
    return {id};
}

Tape::Ref Tape::table_logits(Ref table, Ref u, Ref v, int rows, int cols,
                             double scale) {
    const int id = push(OpKind::TableLogits, rows * cols);
    Op& op = ops_[id];
    op.a = table.op;
    op.b = u.op;
    op.c = v.op;
    op.rows = rows;
    op.cols = cols;
    op.scale = scale;
    const double* t = out_ptr(table.op);
    const double* uv = out_ptr(u.op);
    const double* vv = out_ptr(v.op);
    double* out = out_ptr(id);
    const auto& k = kernels::active();
    for (int i = 0; i < rows; ++i) {
        double* row = out + std::size_t(i) * cols;
        k.scale_add_scalar(scale, t + std::size_t(i) * cols, uv[i], row, cols);
        k.scale_add_vec(1.0, vv, row, row, cols);
    }
    return {id};
}

double Tape::add_nll(Ref logits, int cell) {
    const int n = ops_[logits.op].n;
    const int id = push(OpKind::Nll, 0);
    Op& op = ops_[id];
    op.a = logits.op;
    op.aux = cell;
    const double l = kernels::active().lse(out_ptr(logits.op), n);
    op.scale = l;
    const double term = l - out_ptr(logits.op)[cell];
    loss_ += term;
    nll_ops_.push_back(id);
    return term;
}

std::span<const double> Tape::value(Ref r) const {
    return {out_ptr(r.op), static_cast<std::size_t>(ops_[r.op].n)};
}

int Tape::size(Ref r) const {
    return ops_[r.op].n;
}

void Tape::backward() {
    adj_.assign(vals_.size, 0.0);
    const auto& k = kernels::active();
    std::vector<double> scratch_a, scratch_b;

    for (int oi = static_cast<int>(ops_.size()) - 1; oi >= 0; --oi) {
        const Op& op = ops_[oi];
        switch (op.kind) {
        case OpKind::Const:
        case OpKind::Param:
            break;
        case OpKind::Matvec: {
            // dW += g x^T
            k.ger(adj_ptr(oi), pool_d_.data() + op.aux,
                  adj_.data() + ops_[op.a].out, op.rows, op.cols);
            break;
        }
        case OpKind::WeightedSum: {
            const double* g = adj_ptr(oi);
            for (int t = 0; t < op.aux_n; ++t)
                k.axpy(pool_d_[op.b + t], g,
                       adj_.data() + ops_[pool_i_[op.aux + t]].out, op.n);
            break;
        }
        case OpKind::LatentTable: {
            const double* g = adj_ptr(oi);
            double* d_same = adj_.data() + ops_[op.a].out;
            double* d_cut = adj_.data() + ops_[op.b].out;
            const int l_latent = op.cols - 1;
            if (op.flag)
                for (int l = 1; l <= op.rows; ++l)
                    d_cut[l - 1] += g[(l - 1) * op.cols];
            for (int s = 1; s <= l_latent; ++s) {
                const int l = pool_i_[op.aux + s - 1];
                if (l > 0)
                    d_same[s - 1] += g[(l - 1) * op.cols + s];
            }
            break;
        }
        case OpKind::EdgeLse: {
            const double* g = adj_ptr(oi);
            const double* out = out_ptr(oi);
            const double* t = out_ptr(op.a);
            const double* pv = out_ptr(op.b);
            double* dt = adj_.data() + ops_[op.a].out;
            double* dp = adj_.data() + ops_[op.b].out;
            scratch_a.resize(op.cols);
            scratch_b.resize(op.cols);
            if (op.flag) {
                // w[i,j] = exp(scale*t[i,j] + pre[i] - out[j])
                for (int i = 0; i < op.rows; ++i) {
                    const double* trow = t + std::size_t(i) * op.cols;
                    double* arg = scratch_a.data();
                    k.scale_add_scalar(op.scale, trow, pv[i], arg, op.cols);
                    k.scale_add_vec(-1.0, out, arg, arg, op.cols);
                    k.vexp(arg, scratch_b.data(), op.cols);
                    // wg = w .* g
                    k.mul(scratch_b.data(), g, scratch_a.data(), op.cols);
                    k.axpy(op.scale, scratch_a.data(),
                           dt + std::size_t(i) * op.cols, op.cols);
                    double s = 0.0;
                    for (int j = 0; j < op.cols; ++j)
                        s += scratch_a[j];
                    dp[i] += s;
                }
            } else {
                // w[i,j] = exp(scale*t[i,j] + pre[j] - out[i])
                for (int i = 0; i < op.rows; ++i) {
                    const double* trow = t + std::size_t(i) * op.cols;
                    double* arg = scratch_a.data();
                    k.scale_add_vec(op.scale, trow, pv, arg, op.cols);
                    k.scale_add_scalar(1.0, arg, -out[i], arg, op.cols);
                    k.vexp(arg, scratch_b.data(), op.cols);
                    k.axpy(op.scale * g[i], scratch_b.data(),
                           dt + std::size_t(i) * op.cols, op.cols);
                    k.axpy(g[i], scratch_b.data(), dp, op.cols);
                }
            }
            break;
        }
        case OpKind::SubMax: {
            k.axpy(1.0, adj_ptr(oi), adj_.data() + ops_[op.a].out, op.n);
            break;
        }
        case OpKind::TableLogits: {
            const double* g = adj_ptr(oi);
            double* dt = adj_.data() + ops_[op.a].out;
            double* du = adj_.data() + ops_[op.b].out;
            double* dv = adj_.data() + ops_[op.c].out;
            k.axpy(op.scale, g, dt, op.rows * op.cols);
            for (int i = 0; i < op.rows; ++i) {
                const double* grow = g + std::size_t(i) * op.cols;
                double s = 0.0;
                for (int j = 0; j < op.cols; ++j)
                    s += grow[j];
                du[i] += s;
                k.axpy(1.0, grow, dv, op.cols);
            }
            break;
        }
        case OpKind::Nll: {
            // d logits = softmax(logits) - delta(cell)
            const int n = ops_[op.a].n;
            const double* lv = out_ptr(op.a);
            double* dl = adj_.data() + ops_[op.a].out;
            scratch_a.resize(n);
            k.scale_add_scalar(1.0, lv, -op.scale, scratch_a.data(), n);
            scratch_b.resize(n);
            k.vexp(scratch_a.data(), scratch_b.data(), n);
            k.axpy(1.0, scratch_b.data(), dl, n);
            dl[op.aux] -= 1.0;
            break;
        }
        }
    }
}

std::span<const double> Tape::param_grad(int block_id) const {
    for (std::size_t i = 0; i < param_ids_.size(); ++i)
        if (param_ids_[i] == block_id) {
            const Op& op = ops_[param_ops_[i]];
            return {adj_.data() + op.out, static_cast<std::size_t>(op.n)};
        }
    return {};
}

} // namespace mmcrf
