#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "prefixbench/attack.hpp"
#include "prefixbench/rng.hpp"
#include "prefixbench/tensor.hpp"

namespace pbench {

// Gradient-fidelity property suite shared by the command-line tool and the
// acceptance checks: every primitive op on random instances, a full
// attention block, and the complete prompt-to-loss path, all against central
// finite differences (h = 1e-5).

struct GradcheckResult {
    double worst_primitive = 0.0;
    double worst_block = 0.0;
    double worst_full_path = 0.0;
    double worst() const {
        return std::max({worst_primitive, worst_block, worst_full_path});
    }
};

namespace gradcheckdetail {

inline std::vector<double> random_vec(Rng& rng, std::size_t n, double s = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform_sym(s);
    return v;
}

// entries with magnitude in [0.5, 1.5]: keeps gradient components away from
// zero so the finite-difference comparison stays well conditioned
inline std::vector<double> probe_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) {
        const double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
        x = sign * (0.5 + rng.next_double());
    }
    return v;
}

}  // namespace gradcheckdetail

inline double gradcheck_primitives(int instances = 100, std::uint64_t seed = 99) {
    using gradcheckdetail::probe_vec;
    using gradcheckdetail::random_vec;
    Rng rng(seed);
    double worst = 0.0;
    for (int rep = 0; rep < instances; ++rep) {
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
            {[&](Tape& t, Tensor x) {
                 return t.sum(t.mul(t.softmax(x, 1), t.constant({m, n}, other)));
             },
             {m, n},
             random_vec(rng, m * n, 2.0)},
            {[&](Tape& t, Tensor x) {
                 return t.sum(t.mul(t.log_softmax_rows(x), t.constant({m, n}, other)));
             },
             {m, n},
             random_vec(rng, m * n, 2.0)},
            {[&](Tape& t, Tensor x) {
                 return t.sum(
                     t.mul(t.layer_norm_rows(x, t.constant({n}, gain), t.constant({n}, bias)),
                           t.constant({m, n}, other)));
             },
             {m, n},
             random_vec(rng, m * n, 2.0)},
            {[&](Tape& t, Tensor x) { return t.sum(t.relu(x)); },
             {m, n},
             [&] {
                 // keep inputs away from the kink
                 std::vector<double> v = random_vec(rng, m * n);
                 for (double& x : v) x += (x >= 0 ? 0.01 : -0.01);
                 return v;
             }()},
            {[&](Tape& t, Tensor x) { return t.sum(t.add_rowvec(x, t.constant({n}, gain))); },
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
    return worst;
}

inline double gradcheck_attention_block(std::uint64_t seed = 41) {
    using gradcheckdetail::random_vec;
    Rng rng(seed);
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
    return gradcheck(block, {n, d}, random_vec(rng, n * d));
}

// Prompt one-hots through encoder, controller, taps, and the combined
// attack loss, compared to finite differences along random simplex
// directions.
inline double gradcheck_full_path(int directions = 40, std::uint64_t seed = 99) {
    ModelConfig cfg = small_config();
    cfg.hidden_dim = 16;
    cfg.n_heads = 2;
    cfg.n_encoder_layers = 1;
    cfg.n_controller_layers = 1;
    const PolicyModel model(cfg, 3);
    const Vocab& vocab = Vocab::standard();
    const auto task = sim::sample_task(sim::TaskType::visual_manipulation, 11);
    const auto ref = build_clean_reference(model, make_demonstration(task, 0, vocab));
    const LossSpec spec = LossSpec::ours();
    const std::vector<int> prefix = {6, 30};
    const int V = cfg.vocab_size;

    const auto g = onehot_gradient(model, prefix, ref, spec, vocab, false, /*masked=*/false);
    auto loss_at = [&](const std::vector<double>& onehot) {
        Tape t;
        ForwardOptions opt;
        opt.prefix_onehot = t.constant({static_cast<int>(prefix.size()), V}, onehot);
        return combined_loss_t(t, model, ref, spec, opt).scalar();
    };
    std::vector<double> base = attackdetail::onehot_rows(prefix, V);
    const double h = 1e-5;
    Rng rng(seed);
    double worst = 0.0;
    for (int rep = 0; rep < directions; ++rep) {
        const std::size_t j = rng.next_below(g.size());
        std::vector<double> up = base, dn = base;
        up[j] += h;
        dn[j] -= h;
        const double fd = (loss_at(up) - loss_at(dn)) / (2 * h);
        const double rel = std::abs(g[j] - fd) / std::max({std::abs(g[j]), std::abs(fd), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

inline GradcheckResult run_gradcheck_suite(int instances = 100) {
    GradcheckResult r;
    r.worst_primitive = gradcheck_primitives(instances);
    r.worst_block = gradcheck_attention_block();
    r.worst_full_path = gradcheck_full_path();
    return r;
}

}  // namespace pbench
