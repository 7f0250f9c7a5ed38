#include <doctest.h>

#include <cmath>
#include <functional>

#include "helpers.hpp"
#include "mmcrf/tape.hpp"

using namespace mmcrf;
using test_helpers::rand_vec;

namespace {

using Builder = std::function<void(Tape&, const std::vector<Tape::Ref>&)>;

// Central finite differences over every coordinate of every leaf against
// the tape's reverse pass.
void check_blocks(const std::vector<std::vector<double>>& blocks,
                  const Builder& build, double tol = 1e-6) {
    auto run = [&](const std::vector<std::vector<double>>& vals, Tape* keep) {
        Tape local;
        Tape& t = keep ? *keep : local;
        std::vector<Tape::Ref> leaves;
        for (std::size_t b = 0; b < vals.size(); ++b)
            leaves.push_back(t.param(static_cast<int>(b), vals[b]));
        build(t, leaves);
        return t.loss();
    };

    Tape tape;
    const double base = run(blocks, &tape);
    CHECK(std::isfinite(base));
    tape.backward();

    const double h = 1e-6;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto grad = tape.param_grad(static_cast<int>(b));
        REQUIRE(grad.size() == blocks[b].size());
        for (std::size_t i = 0; i < blocks[b].size(); ++i) {
            auto plus = blocks, minus = blocks;
            plus[b][i] += h;
            minus[b][i] -= h;
            const double fd = (run(plus, nullptr) - run(minus, nullptr)) / (2 * h);
            const double diff = std::abs(fd - grad[i]);
            const double scale = std::max({1.0, std::abs(fd), std::abs(grad[i])});
            CHECK(diff / scale < tol);
        }
    }
}

} // namespace

TEST_SUITE_BEGIN("tape");

TEST_CASE("matvec adjoint is the rank-1 update") {
    Rng rng(1);
    const auto x = rand_vec(rng, 4);
    check_blocks({rand_vec(rng, 12)}, [&](Tape& t, const auto& leaves) {
        const auto out = t.matvec(leaves[0], 3, 4, x);
        t.add_nll(out, 1);
    });
}

TEST_CASE("weighted_sum adjoint scales by the coefficients") {
    Rng rng(2);
    check_blocks({rand_vec(rng, 4), rand_vec(rng, 4)},
                 [&](Tape& t, const auto& leaves) {
                     const Tape::Ref terms[2] = {leaves[0], leaves[1]};
                     const double coefs[2] = {0.25, -1.5};
                     const auto s = t.weighted_sum(terms, coefs);
                     t.add_nll(s, 2);
                 });
}

TEST_CASE("latent_table routes gradient only through cut and same cells") {
    Rng rng(3);
    const std::vector<int> compat{1, 2, 0};
    for (const bool cuttable : {true, false}) {
        check_blocks(
            {rand_vec(rng, 3), rand_vec(rng, 2)},
            [&](Tape& t, const auto& leaves) {
                const auto table = t.latent_table(leaves[0], leaves[1], compat,
                                                  2, 3, 5.0, cuttable);
                t.add_nll(table, 1); // cell (0, s=1): a same cell
                t.add_nll(table, 4); // cell (1, 0): cut (penalty when frozen)
            });
    }

    // a penalty-only selection really has zero gradient everywhere
    Tape t;
    const auto same = t.param(0, std::vector<double>{0.3, -0.2, 0.9});
    const auto cut = t.param(1, std::vector<double>{0.1, 0.7});
    const auto table = t.latent_table(same, cut, compat, 2, 3, 5.0, true);
    const auto v = t.value(table);
    CHECK(v[0 * 4 + 0] == doctest::Approx(0.1));
    CHECK(v[0 * 4 + 1] == doctest::Approx(0.3));
    CHECK(v[0 * 4 + 2] == doctest::Approx(5.0));
    CHECK(v[1 * 4 + 2] == doctest::Approx(-0.2));
    CHECK(v[1 * 4 + 3] == doctest::Approx(5.0));
}

TEST_CASE("edge_lse adjoint in both reduction directions") {
    Rng rng(4);
    for (const bool reduce_rows : {true, false}) {
        const int pre_len = reduce_rows ? 3 : 4;
        check_blocks(
            {rand_vec(rng, 12, 2.0), rand_vec(rng, pre_len, 2.0)},
            [&](Tape& t, const auto& leaves) {
                const auto out = t.edge_lse(leaves[0], leaves[1], 3, 4, -0.8,
                                            reduce_rows);
                t.add_nll(out, reduce_rows ? 2 : 1);
            });
    }
}

TEST_CASE("sub_max is exact under shift-invariant consumers") {
    Rng rng(5);
    check_blocks({rand_vec(rng, 12, 2.0), rand_vec(rng, 3, 2.0)},
                 [&](Tape& t, const auto& leaves) {
                     const auto raw =
                         t.edge_lse(leaves[0], leaves[1], 3, 4, -1.0, true);
                     const auto m = t.sub_max(raw);
                     t.add_nll(m, 0);
                 });
}

TEST_CASE("table_logits adjoint") {
    Rng rng(6);
    check_blocks({rand_vec(rng, 6), rand_vec(rng, 2), rand_vec(rng, 3)},
                 [&](Tape& t, const auto& leaves) {
                     const auto logits = t.table_logits(
                         leaves[0], leaves[1], leaves[2], 2, 3, -1.25);
                     t.add_nll(logits, 4);
                 });
}

TEST_CASE("a small unrolled chain differentiates end to end") {
    Rng rng(7);
    const auto xa = rand_vec(rng, 3);
    const auto xb = rand_vec(rng, 3);
    check_blocks(
        {rand_vec(rng, 2 * 3), rand_vec(rng, 4)},
        [&](Tape& t, const auto& leaves) {
            // two nodes, one edge, two synchronous rounds by hand
            const auto ca = t.matvec(leaves[0], 2, 3, xa);
            const auto cb = t.matvec(leaves[0], 2, 3, xb);
            const auto table = leaves[1];
            auto msg_ab = t.zeros(2);
            auto msg_ba = t.zeros(2);
            for (int round = 0; round < 2; ++round) {
                const Tape::Ref ta[2] = {ca, msg_ba};
                const double wa[2] = {-1.0, 0.0};
                const auto pre_a = t.weighted_sum(ta, wa);
                const Tape::Ref tb[2] = {cb, msg_ab};
                const double wb[2] = {-1.0, 0.0};
                const auto pre_b = t.weighted_sum(tb, wb);
                msg_ab = t.sub_max(t.edge_lse(table, pre_a, 2, 2, -1.0, true));
                msg_ba = t.sub_max(t.edge_lse(table, pre_b, 2, 2, -1.0, false));
            }
            const Tape::Ref ua_t[3] = {ca, msg_ba, msg_ba};
            const double ua_c[3] = {-1.0, 1.0, 0.0};
            const auto ua = t.weighted_sum(ua_t, ua_c);
            const Tape::Ref ub_t[2] = {cb, msg_ab};
            const double ub_c[2] = {-1.0, 1.0};
            const auto ub = t.weighted_sum(ub_t, ub_c);
            const auto logits = t.table_logits(table, ua, ub, 2, 2, -1.0);
            t.add_nll(logits, 3);
        });
}

TEST_SUITE_END();
