#pragma once

#include <cstring>
#include <memory>
#include <span>
#include <vector>

namespace mmcrf {

// Eager-forward record of vector operations with hand-written adjoints.
// Message passing runs through this once for both plain inference (forward
// only) and learning, where backward() differentiates the truncated
// schedule exactly as executed.
//
// Normalization note: sub_max subtracts a detached constant. Downstream
// consumers are invariant to per-vector shifts (all beliefs renormalize),
// so routing no gradient through the subtracted maximum is exact.
class Tape {
public:
    struct Ref {
        int op = -1;
        bool valid() const { return op >= 0; }
    };

    Tape() = default;

    Ref constant(std::span<const double> v);
    Ref zeros(int n);

    // Parameter leaf; at most one per block id.
    Ref param(int block_id, std::span<const double> v);

    // out[r] = dot(w[r,:], x); w must be a param or constant leaf, x is
    // plain data captured by copy.
    Ref matvec(Ref w, int rows, int cols, std::span<const double> x);

    // out = sum_k coefs[k] * terms[k]
    Ref weighted_sum(std::span<const Ref> terms, std::span<const double> coefs);

    // l_node x (l_latent + 1) table: column 0 = cut costs (penalty when not
    // cuttable), cell (compat_row[s-1], s) = same[s-1], penalty elsewhere.
    Ref latent_table(Ref same, Ref cut, std::span<const int> compat_row,
                     int l_node, int l_latent, double penalty, bool cuttable);

    // reduce_rows: out[j] = lse_i(scale * t[i*cols+j] + pre[i])
    // otherwise:   out[i] = lse_j(scale * t[i*cols+j] + pre[j])
    Ref edge_lse(Ref table, Ref pre, int rows, int cols, double scale,
                 bool reduce_rows);

    // out = x - max(x), the maximum treated as a detached constant
    Ref sub_max(Ref x);

    // out[i*cols+j] = scale * t[i*cols+j] + u[i] + v[j]
    Ref table_logits(Ref table, Ref u, Ref v, int rows, int cols, double scale);

    // Accumulates -log softmax(logits)[cell]; returns the added term.
    double add_nll(Ref logits, int cell);

    double loss() const { return loss_; }
    std::span<const double> value(Ref r) const;
    int size(Ref r) const;

    // Reverse pass seeding every recorded NLL term with adjoint 1.
    void backward();

    // Adjoint of a parameter leaf; valid after backward().
    std::span<const double> param_grad(int block_id) const;
    std::span<const int> param_block_ids() const { return param_ids_; }

private:
    enum class OpKind : unsigned char {
        Const, Param, Matvec, WeightedSum, LatentTable, EdgeLse, SubMax,
        TableLogits, Nll
    };

    struct Op {
        OpKind kind;
        bool flag = false; // EdgeLse: reduce_rows; LatentTable: cuttable
        int out = 0;
        int n = 0;
        int a = -1, b = -1, c = -1;
        int rows = 0, cols = 0;
        double scale = 0.0; // EdgeLse/TableLogits scale; Nll: cached lse
        int aux = -1;       // pool offsets / nll cell
        int aux_n = 0;
    };

    // Growable value arena; grown elements stay uninitialized (a plain
    // vector would value-initialize them on every op).
    struct Arena {
        std::unique_ptr<double[]> data;
        std::size_t size = 0;
        std::size_t capacity = 0;

        std::size_t grow(std::size_t n) {
            if (size + n > capacity) {
                std::size_t cap = capacity ? capacity * 2 : 1024;
                while (cap < size + n)
                    cap *= 2;
                std::unique_ptr<double[]> next(new double[cap]);
                if (size)
                    std::memcpy(next.get(), data.get(), size * sizeof(double));
                data = std::move(next);
                capacity = cap;
            }
            const std::size_t at = size;
            size += n;
            return at;
        }
    };

    int push(OpKind kind, int n);
    double* out_ptr(int op) { return vals_.data.get() + ops_[op].out; }
    const double* out_ptr(int op) const {
        return vals_.data.get() + ops_[op].out;
    }
    double* adj_ptr(int op) { return adj_.data() + ops_[op].out; }

    std::vector<Op> ops_;
    Arena vals_;
    std::vector<double> adj_;
    std::vector<double> pool_d_; // captured features, weighted-sum coefs
    std::vector<int> pool_i_;    // weighted-sum term ops, compat rows
    std::vector<int> param_ids_;
    std::vector<int> param_ops_;
    std::vector<int> nll_ops_;
    std::vector<double> scratch_row_, scratch_max_, scratch_sum_;
    double loss_ = 0.0;
};

} // namespace mmcrf
