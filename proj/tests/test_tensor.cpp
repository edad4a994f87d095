#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "prefixbench/rng.hpp"
#include "prefixbench/tensor.hpp"

using namespace pbench;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double s = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform_sym(s);
    return v;
}

// probe entries with magnitude in [0.5, 1.5]: keeps every gradient component
// away from zero so the FD comparison stays meaningful
std::vector<double> probe_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) {
        const double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
        x = sign * (0.5 + rng.next_double());
    }
    return v;
}

}  // namespace

TEST_CASE("matmul identity and zero cases") {
    Tape t;
    Tensor id = t.constant({2, 2}, {1, 0, 0, 1});
    Tensor b = t.constant({2, 2}, {3, 4, 5, 6});
    Tensor c = t.matmul(id, b);
    CHECK(c.values() == std::vector<double>{3, 4, 5, 6});

    Tensor a = t.constant({1, 2}, {1, 2});
    Tensor z = t.constant({2, 1}, {0, 0});
    CHECK(t.matmul(a, z).scalar() == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(123);
    std::vector<double> a = random_vec(rng, 12), b = random_vec(rng, 8);
    Tape t;
    Tensor c = t.matmul(t.constant({3, 4}, a), t.constant({4, 2}, b));
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += a[i * 4 + k] * b[k * 2 + j];
            worst = std::max(worst, std::abs(acc - c.at(i, j)));
        }
    CHECK(worst < 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tape t;
    Tensor a = t.constant({2, 3}, std::vector<double>(6, 0.0));
    Tensor b = t.constant({2, 2}, std::vector<double>(4, 0.0));
    CHECK_THROWS_WITH(t.matmul(a, b),
                      Catch::Matchers::ContainsSubstring("[2,3]") &&
                          Catch::Matchers::ContainsSubstring("[2,2]"));
}

TEST_CASE("softmax symmetry, stabilization, oracle") {
    Tape t;
    Tensor s = t.softmax(t.constant({3}, {0, 0, 0}), 0);
    for (int i = 0; i < 3; ++i) CHECK(s[i] == Catch::Approx(1.0 / 3.0).margin(1e-15));

    Tensor big = t.softmax(t.constant({2}, {1000, 0}), 0);
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(big[1] == Catch::Approx(0.0).margin(1e-12));

    Tensor y = t.softmax(t.constant({3}, {1, 2, 3}), 0);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(y[i] - std::exp(1.0 + i) / z) < 1e-12);
}

TEST_CASE("softmax rows sum to one and are permutation equivariant") {
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = rng.next_int(2, 9);
        std::vector<double> x = random_vec(rng, n, 5.0);
        Tape t;
        std::vector<double> y = t.softmax(t.constant({n}, x), 0).values();
        double s = 0.0;
        for (double v : y) s += v;
        CHECK(std::abs(s - 1.0) < 1e-12);

        // swap two coordinates: output swaps identically
        std::vector<double> xp = x;
        std::swap(xp[0], xp[n - 1]);
        std::vector<double> yp = t.softmax(t.constant({n}, xp), 0).values();
        std::swap(yp[0], yp[n - 1]);
        for (int i = 0; i < n; ++i) CHECK(y[i] == Catch::Approx(yp[i]).margin(1e-15));
    }
}

TEST_CASE("softmax over axis 0 of a matrix normalizes columns") {
    Tape t;
    Tensor y = t.softmax(t.constant({2, 2}, {0, 10, 0, -10}), 0);
    CHECK(y.at(0, 0) + y.at(1, 0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(y.at(0, 1) + y.at(1, 1) == Catch::Approx(1.0).margin(1e-12));
    CHECK(y.at(0, 1) > 0.999);
}

TEST_CASE("cosine similarity values and errors") {
    Tape t;
    Tensor a = t.constant({3}, {1, 2, 3});
    CHECK(t.cosine_similarity(a, a).scalar() == Catch::Approx(1.0).margin(1e-15));

    Tensor e1 = t.constant({2}, {1, 0});
    Tensor e2 = t.constant({2}, {0, 1});
    CHECK(t.cosine_similarity(e1, e2).scalar() == Catch::Approx(0.0).margin(1e-15));

    Tensor b = t.constant({3}, {4, 5, 6});
    CHECK(t.cosine_similarity(a, b).scalar() ==
          Catch::Approx(32.0 / (std::sqrt(14.0) * std::sqrt(77.0))).epsilon(1e-14));

    Tensor zero = t.constant({3}, {0, 0, 0});
    CHECK_THROWS_AS(t.cosine_similarity(a, zero), DegenerateInputError);
}

TEST_CASE("backward: linear case, cosine fd, softmax cross-entropy closed form") {
    {
        Tape t;
        Tensor x = t.leaf({4}, {1, 2, 3, 4}, true);
        t.backward(t.sum(x));
        for (double g : x.grad()) CHECK(g == 1.0);
    }
    {
        // against a distinct constant the gradient is nonzero and FD-checkable
        const std::vector<double> xc = {3, -1};
        auto f = [&](Tape& t, Tensor x) { return t.cosine_similarity(x, t.constant({2}, xc)); };
        CHECK(gradcheck(f, {2}, {1, 2}) < 1e-6);
    }
    {
        // at x == const copy of x the similarity is at its maximum: the
        // analytic gradient is exactly zero and central differences sit at
        // curvature noise (~h^2), below any meaningful threshold
        const std::vector<double> xc = {1, 2};
        Tape t;
        Tensor x = t.leaf({2}, xc, true);
        t.backward(t.cosine_similarity(x, t.constant({2}, xc)));
        for (double g : x.grad()) CHECK(std::abs(g) < 1e-14);
        for (std::size_t i = 0; i < 2; ++i) {
            std::vector<double> xp = xc, xm = xc;
            xp[i] += 1e-5;
            xm[i] -= 1e-5;
            Tape tp, tm;
            const double fd = (tp.cosine_similarity(tp.leaf({2}, xp, false), tp.constant({2}, xc)).scalar() -
                               tm.cosine_similarity(tm.leaf({2}, xm, false), tm.constant({2}, xc)).scalar()) /
                              2e-5;
            CHECK(std::abs(fd) < 1e-9);
        }
    }
    {
        Tape t;
        Tensor logits = t.leaf({1, 3}, {1, 2, 3}, true);
        Tensor nll = t.scale(t.pick(t.log_softmax_rows(logits), 2), -1.0);
        t.backward(nll);
        std::vector<double> sm = t.softmax(t.constant({3}, {1, 2, 3}), 0).values();
        std::vector<double> g = logits.grad();
        for (int i = 0; i < 3; ++i)
            CHECK(g[i] == Catch::Approx(sm[i] - (i == 2 ? 1.0 : 0.0)).margin(1e-12));
    }
}

TEST_CASE("backward rejects non-scalar loss") {
    Tape t;
    Tensor x = t.leaf({2}, {1, 2}, true);
    CHECK_THROWS_AS(t.backward(x), ContractError);
}

TEST_CASE("gradient accumulation: two uses sum both path gradients") {
    // loss = sum(x*x) + sum(x): grad = 2x + 1
    Tape t;
    Tensor x = t.leaf({3}, {1, -2, 0.5}, true);
    Tensor loss = t.add(t.sum(t.mul(x, x)), t.sum(x));
    t.backward(loss);
    std::vector<double> g = x.grad();
    CHECK(g[0] == Catch::Approx(3.0));
    CHECK(g[1] == Catch::Approx(-3.0));
    CHECK(g[2] == Catch::Approx(2.0));
}

TEST_CASE("gradcheck: quadratic and constant closed forms") {
    auto quad = [](Tape& t, Tensor x) { return t.sum(t.mul(x, x)); };
    CHECK(gradcheck(quad, {2}, {1, -2}) < 1e-7);

    {
        Tape t;
        Tensor x = t.leaf({2}, {1, -2}, true);
        t.backward(quad(t, x));
        std::vector<double> g = x.grad();
        CHECK(g[0] == Catch::Approx(2.0).margin(1e-12));
        CHECK(g[1] == Catch::Approx(-4.0).margin(1e-12));
    }

    auto constant = [](Tape& t, Tensor) { return t.scalar_const(3.5); };
    CHECK(gradcheck(constant, {3}, {1, 2, 3}) < 1e-8);
}

TEST_CASE("every primitive op passes gradcheck on random inputs") {
    Rng rng(99);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int m = rng.next_int(1, 5), k = rng.next_int(1, 5), n = rng.next_int(2, 5);
        const std::vector<double> bdat = random_vec(rng, k * n);
        const std::vector<double> gain = probe_vec(rng, n);
        const std::vector<double> bias = random_vec(rng, n, 0.5);
        const std::vector<double> other = probe_vec(rng, m * n);
        const std::vector<double> cos_ref = probe_vec(rng, m * n);

        struct Case {
            std::function<Tensor(Tape&, Tensor)> f;
            std::vector<int> shape;
            std::vector<double> x;
        };
        std::vector<Case> cases = {
            {[&](Tape& t, Tensor x) { return t.sum(t.matmul(x, t.constant({k, n}, bdat))); },
             {m, k},
             random_vec(rng, m * k)},
            {[&](Tape& t, Tensor x) { return t.sum(t.matmul_nt(x, t.constant({n, k}, bdat))); },
             {m, k},
             random_vec(rng, m * k)},
            {[&](Tape& t, Tensor x) { return t.sum(t.mul(t.softmax(x, 1), t.constant({m, n}, other))); },
             {m, n},
             random_vec(rng, m * n, 2.0)},
            {[&](Tape& t, Tensor x) {
                 return t.sum(t.mul(t.log_softmax_rows(x), t.constant({m, n}, other)));
             },
             {m, n},
             random_vec(rng, m * n, 2.0)},
            {[&](Tape& t, Tensor x) {
                 return t.sum(t.mul(
                     t.layer_norm_rows(x, t.constant({n}, gain), t.constant({n}, bias)),
                     t.constant({m, n}, other)));
             },
             {m, n},
             random_vec(rng, m * n, 2.0)},
            {[&](Tape& t, Tensor x) { return t.sum(t.relu(x)); }, {m, n},
             [&] {
                 // keep inputs away from the kink; finite differences are
                 // meaningless within h of 0
                 std::vector<double> v = random_vec(rng, m * n);
                 for (double& x : v) x += (x >= 0 ? 0.01 : -0.01);
                 return v;
             }()},
            {[&](Tape& t, Tensor x) {
                 return t.sum(t.add_rowvec(x, t.constant({n}, gain)));
             },
             {m, n},
             random_vec(rng, m * n)},
            {[&](Tape& t, Tensor x) {
                 return t.cosine_similarity(x, t.constant({m * n}, cos_ref));
             },
             {m * n},
             probe_vec(rng, m * n)},
            {[&](Tape& t, Tensor x) { return t.dot(x, t.constant({m * n}, other)); },
             {m * n},
             random_vec(rng, m * n)},
            {[&](Tape& t, Tensor x) {
                 return t.sum(t.mul(t.mean_rows(x), t.constant({1, n}, gain)));
             },
             {m, n},
             random_vec(rng, m * n)},
        };
        for (auto& c : cases) worst = std::max(worst, gradcheck(c.f, c.shape, c.x));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("slice, concat and gather route gradients to the right places") {
    Tape t;
    Tensor x = t.leaf({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    Tensor loss = t.sum(t.slice_rows(x, 1, 1));
    t.backward(loss);
    CHECK(x.grad() == std::vector<double>{0, 0, 1, 1, 0, 0});

    Tape t2;
    Tensor tab = t2.leaf({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    Tensor g = t2.gather_rows(tab, {2, 2, 0});
    t2.backward(t2.sum(g));
    CHECK(tab.grad() == std::vector<double>{1, 1, 0, 0, 2, 2});

    Tape t3;
    Tensor a = t3.leaf({1, 2}, {1, 2}, true);
    Tensor b = t3.constant({1, 2}, {3, 4});
    Tensor cat = t3.concat_rows({a, b});
    CHECK(cat.values() == std::vector<double>{1, 2, 3, 4});
    Tensor cc = t3.concat_cols({a, b});
    CHECK(cc.values() == std::vector<double>{1, 2, 3, 4});
    t3.backward(t3.sum(t3.slice_cols(cc, 1, 2)));
    CHECK(a.grad() == std::vector<double>{0, 1});
}

TEST_CASE("deterministic: identical inputs give bit-identical outputs") {
    Rng rng(5);
    std::vector<double> a = random_vec(rng, 6), b = random_vec(rng, 6);
    auto run = [&]() {
        Tape t;
        Tensor y = t.softmax(t.matmul(t.constant({2, 3}, a), t.constant({3, 2}, b)), 1);
        return y.values();
    };
    CHECK(run() == run());
}

TEST_CASE("full attention block passes gradcheck") {
    // one self-attention + feedforward block built only from primitives
    Rng rng(41);
    const int n = 3, d = 4, h = 2, dh = d / h;
    std::vector<double> wq = random_vec(rng, d * d, 0.5), wk = random_vec(rng, d * d, 0.5),
                        wv = random_vec(rng, d * d, 0.5), wo = random_vec(rng, d * d, 0.5),
                        w1 = random_vec(rng, d * 2 * d, 0.5), w2 = random_vec(rng, 2 * d * d, 0.5),
                        gain(d, 1.0), bias(d, 0.0), probe = random_vec(rng, n * d);
    auto block = [&](Tape& t, Tensor x) {
        Tensor q = t.matmul(x, t.constant({d, d}, wq));
        Tensor k = t.matmul(x, t.constant({d, d}, wk));
        Tensor v = t.matmul(x, t.constant({d, d}, wv));
        std::vector<Tensor> heads;
        for (int i = 0; i < h; ++i) {
            Tensor qi = t.slice_cols(q, i * dh, dh);
            Tensor ki = t.slice_cols(k, i * dh, dh);
            Tensor vi = t.slice_cols(v, i * dh, dh);
            Tensor att = t.softmax(t.scale(t.matmul_nt(qi, ki), 1.0 / std::sqrt(double(dh))), 1);
            heads.push_back(t.matmul(att, vi));
        }
        Tensor attn = t.matmul(t.concat_cols(heads), t.constant({d, d}, wo));
        Tensor x1 = t.layer_norm_rows(t.add(x, attn), t.constant({d}, gain), t.constant({d}, bias));
        Tensor ff = t.matmul(t.relu(t.matmul(x1, t.constant({d, 2 * d}, w1))),
                             t.constant({2 * d, d}, w2));
        Tensor x2 = t.layer_norm_rows(t.add(x1, ff), t.constant({d}, gain), t.constant({d}, bias));
        return t.sum(t.mul(x2, t.constant({n, d}, probe)));
    };
    CHECK(gradcheck(block, {n, d}, random_vec(rng, n * d)) < 1e-4);
}
