#include "test_support.hpp"

namespace dctc::test {

std::vector<GraphCase> core_graph_cases() {
    std::vector<GraphCase> cases;

    cases.push_back({"arith_chain", {2, 3}, 0.0, [](Tape& t, Tensor x, Rng& rng) {
                         Tensor c1 = random_const(t, {2, 3}, rng);
                         Tensor c2 = random_const(t, {2, 3}, rng);
                         Tensor a = add(x, c1);
                         Tensor b = sub(smul(x, 1.3), c2);
                         return sum_all(mul(a, b));
                     }});

    cases.push_back({"row_broadcast_add", {3, 4}, 0.0, [](Tape& t, Tensor x, Rng& rng) {
                         Tensor bias = random_const(t, {4}, rng);
                         return sum_all(tanh_t(add(x, bias)));
                     }});

    cases.push_back({"matmul_both_sides", {3, 4}, 0.0, [](Tape& t, Tensor x, Rng& rng) {
                         Tensor r = random_const(t, {4, 2}, rng);
                         Tensor l = random_const(t, {2, 3}, rng);
                         Tensor xr = matmul(x, r);       // [3,2]
                         Tensor lx = matmul(l, x);       // [2,4]
                         return add(sum_all(sigmoid(xr)), sum_all(tanh_t(lx)));
                     }});

    cases.push_back({"concat_slice", {2, 3}, 0.0, [](Tape& t, Tensor x, Rng& rng) {
                         Tensor c = random_const(t, {2, 2}, rng);
                         Tensor cat = concat_cols({x, c, x});  // [2,8]
                         Tensor mid = slice_cols(cat, 1, 6);
                         Tensor w = random_const(t, {2, 6}, rng);
                         return sum_all(mul(mid, w));
                     }});

    cases.push_back({"pointwise_mix", {2, 4}, 0.05, [](Tape& t, Tensor x, Rng& rng) {
                         Tensor c = random_const(t, {2, 4}, rng);
                         Tensor a = mul(sigmoid(x), tanh_t(x));
                         Tensor b = exp_t(smul(x, 0.3));
                         Tensor d = log_t(add_scalar(abs_t(x), 0.5));
                         return sum_all(mul(add(add(a, b), d), c));
                     }});

    cases.push_back({"softmax_two_layer", {2, 5}, 0.0, [](Tape& t, Tensor x, Rng& rng) {
                         Tensor w1 = random_const(t, {5, 4}, rng);
                         Tensor w2 = random_const(t, {4, 3}, rng);
                         Tensor m = random_const(t, {2, 3}, rng);
                         Tensor h = softmax_rows(matmul(x, w1));
                         Tensor y = log_softmax_rows(matmul(h, w2));
                         return sum_all(mul(y, m));
                     }});

    cases.push_back({"embedding", {5, 3}, 0.0, [](Tape& t, Tensor x, Rng& rng) {
                         const std::vector<int> ids = {1, 4, 0, 4};
                         Tensor rows = embedding_rows(x, ids);
                         Tensor c = random_const(t, {4, 3}, rng);
                         return sum_all(mul(tanh_t(rows), c));
                     }});

    cases.push_back({"gather_pick_select", {3, 4}, 0.0, [](Tape& t, Tensor x, Rng& rng) {
                         const std::vector<int> idx = {0, 2, 2, 3, 1};
                         const std::vector<int> ids = {3, 0, 2};
                         Tensor g = gather_cols(softmax_rows(x), idx);  // [3,5]
                         Tensor c = random_const(t, {3, 5}, rng);
                         Tensor p = pick_cols(x, ids);                  // [3]
                         Tensor sel = index_select(row_sums(x), {2, 0, 1, 1});
                         Tensor d = random_const(t, {4}, rng);
                         return add(add(sum_all(mul(g, c)), sum_all(p)), sum_all(mul(sel, d)));
                     }});

    cases.push_back({"scale_rows_both", {3, 4}, 0.0, [](Tape& t, Tensor x, Rng& rng) {
                         Tensor c = random_const(t, {3, 4}, rng);
                         Tensor s = random_const(t, {3}, rng);
                         Tensor a = scale_rows(x, s);           // grad w.r.t. data
                         Tensor b = scale_rows(c, row_sums(x)); // grad w.r.t. scales
                         return add(sum_all(a), sum_all(tanh_t(b)));
                     }});

    cases.push_back({"reductions", {3, 4}, 0.0, [](Tape& t, Tensor x, Rng& rng) {
                         Tensor c = random_const(t, {4}, rng);
                         Tensor d = random_const(t, {3}, rng);
                         Tensor a = sum_all(mul(col_means(x), c));
                         Tensor b = sum_all(mul(row_sums(x), d));
                         return add(add(a, b), mean_all(mul(x, x)));
                     }});

    cases.push_back({"entropy_block", {3, 4}, 0.0, [](Tape& t, Tensor x, Rng&) {
                         Tensor p = softmax_rows(x);
                         return xlogx_sum(p);
                     }});

    cases.push_back({"abs_kink_sides", {2, 3}, 0.1, [](Tape& t, Tensor x, Rng& rng) {
                         Tensor c = random_const(t, {2, 3}, rng);
                         return sum_all(mul(abs_t(x), c));
                     }});

    return cases;
}

}  // namespace dctc::test
