#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "prefixbench/policy.hpp"
#include "prefixbench/prompt.hpp"
#include "prefixbench/training.hpp"

namespace pbench {

// Universal adversarial prefix synthesis: feature-based losses over the
// policy's intermediate taps, one-hot token gradients, and four discrete
// optimizers (random, greedy coordinate descent, its momentum variant, and
// relaxed gradient descent with cosine projection).

enum class LossMetric { cosine, squared_l2 };

inline const char* metric_name(LossMetric m) {
    return m == LossMetric::cosine ? "cosine" : "squared_l2";
}

struct LossSpec {
    bool discrete = false;
    bool continuous = true;
    bool self_attn = true;
    bool cross_attn = false;
    double alpha = 1.0;  // weight of the continuous-feature term
    double beta = 20.0;  // weight of the attention-feature term(s)
    LossMetric metric = LossMetric::cosine;

    void validate() const {
        if (!discrete && !continuous && !self_attn && !cross_attn)
            throw ContractError("loss spec: at least one term required");
        if (!(std::isfinite(alpha) && std::isfinite(beta) && alpha >= 0.0 && beta >= 0.0))
            throw ContractError("loss spec: weights must be finite and >= 0");
    }

    static LossSpec ours() { return {}; }
    static LossSpec discrete_only() { return {true, false, false, false, 1.0, 20.0}; }
    static LossSpec continuous_only() { return {false, true, false, false, 1.0, 20.0}; }
    static LossSpec continuous_cross() { return {false, true, false, true, 1.0, 20.0}; }

    std::string terms_string() const {
        std::string s;
        auto app = [&](bool on, const char* name) {
            if (!on) return;
            if (!s.empty()) s += ",";
            s += name;
        };
        app(discrete, "discrete");
        app(continuous, "continuous");
        app(self_attn, "self_attn");
        app(cross_attn, "cross_attn");
        return s;
    }
};

struct AttackConfig {
    int steps = 300;
    int batch_size = 64;
    int top_k = 256;  // clamped to |attackable_ids| at use
    double momentum_weight = 1.0;
    int gd_epochs = 3000;
    double gd_learning_rate = 0.1;
    std::uint64_t rng_seed = 0;
    int prefix_length = 25;
    bool first_step_only = false;  // optimize on the demo's first step only

    void validate() const {
        if (steps <= 0 || batch_size <= 0 || top_k <= 0 || gd_epochs <= 0 || prefix_length <= 0)
            throw ContractError("attack config: counts must be positive");
        if (momentum_weight < 0.0 || gd_learning_rate <= 0.0)
            throw ContractError("attack config: bad momentum or learning rate");
    }

    static AttackConfig ci_profile() {
        AttackConfig c;
        c.steps = 50;
        c.batch_size = 16;
        c.top_k = 16;
        return c;
    }
};

struct AdversarialPrefix {
    std::vector<int> token_ids;
    std::string method;
    std::uint64_t seed = 0;
    int source_demo_id = -1;
    double final_loss = 0.0;
    std::vector<double> loss_trace;
};

// ---- clean reference ----------------------------------------------------------

// Per-step cache of what the unattacked model produces on the source
// demonstration: its own greedy bins plus the feature taps the losses compare
// against. Histories are the expert's (teacher forcing), so adversarial and
// clean forwards differ only in the prompt.
struct CleanStepRef {
    History history;
    std::array<int, 4> clean_bins;
    std::vector<double> controller_output;
    std::vector<std::vector<double>> self_taps;
    std::vector<std::vector<double>> cross_taps;
};

struct CleanReference {
    int demo_id = -1;
    PromptSequence prompt;
    std::vector<CleanStepRef> steps;
};

inline CleanReference build_clean_reference(const PolicyModel& model, const Demonstration& demo) {
    CleanReference ref;
    ref.demo_id = demo.demo_id;
    ref.prompt = demo.prompt;
    const int n_bins = model.config().n_bins;
    History h;
    for (const auto& [scene, act] : demo.steps) {
        Tape t;
        const ForwardResult fr = model.forward(t, demo.prompt, h);
        CleanStepRef step;
        step.history = h;
        for (int k = 0; k < 4; ++k)
            step.clean_bins[k] = PolicyModel::argmax(fr.head_logits[k].values());
        step.controller_output = fr.taps.controller_output.values();
        for (const Tensor& tap : fr.taps.self_attn) step.self_taps.push_back(tap.values());
        for (const Tensor& tap : fr.taps.cross_attn) step.cross_taps.push_back(tap.values());
        ref.steps.push_back(std::move(step));
        h.push_back(HistoryStep{scene.objects, discretize_action(act, n_bins)});
    }
    return ref;
}

// ---- differentiable losses ------------------------------------------------------

namespace attackdetail {

inline Tensor metric_term(Tape& t, const Tensor& adv, const std::vector<double>& clean,
                          LossMetric metric) {
    Tensor ref = t.constant({1, static_cast<int>(clean.size())}, clean);
    if (metric == LossMetric::cosine) return t.cosine_similarity(adv, ref);
    // Eq.-style negated squared distance: minimized to push features apart
    Tensor diff = t.sub(adv, ref);
    return t.scale(t.dot(diff, diff), -1.0);
}

struct StepForwards {
    std::vector<ForwardResult> results;  // one per reference step
};

inline StepForwards forward_all(Tape& t, const PolicyModel& model, const CleanReference& ref,
                                const ForwardOptions& opt, bool first_step_only) {
    if (ref.steps.empty()) throw ContractError("clean reference has no steps");
    StepForwards out;
    const std::size_t n = first_step_only ? 1 : ref.steps.size();
    for (std::size_t s = 0; s < n; ++s)
        out.results.push_back(model.forward(t, ref.prompt, ref.steps[s].history, opt));
    return out;
}

}  // namespace attackdetail

// Summed log-probability the attacked model assigns to the clean bins a*.
// Minimizing drives the output distribution away from the clean action.
inline Tensor loss_discrete_t(Tape& t, const attackdetail::StepForwards& fwd,
                              const CleanReference& ref) {
    Tensor total;
    for (std::size_t s = 0; s < fwd.results.size(); ++s) {
        for (int k = 0; k < 4; ++k) {
            Tensor lp = t.pick(t.log_softmax_rows(fwd.results[s].head_logits[k]),
                               ref.steps[s].clean_bins[k]);
            total = total.valid() ? t.add(total, lp) : lp;
        }
    }
    return total;
}

// Mean similarity between attacked and clean controller outputs.
inline Tensor loss_continuous_t(Tape& t, const attackdetail::StepForwards& fwd,
                                const CleanReference& ref, LossMetric metric) {
    Tensor total;
    for (std::size_t s = 0; s < fwd.results.size(); ++s) {
        Tensor term = attackdetail::metric_term(t, fwd.results[s].taps.controller_output,
                                                ref.steps[s].controller_output, metric);
        total = total.valid() ? t.add(total, term) : term;
    }
    return t.scale(total, 1.0 / static_cast<double>(fwd.results.size()));
}

// Mean over controller layers and steps of the per-tap similarity.
inline Tensor loss_attn_t(Tape& t, const attackdetail::StepForwards& fwd,
                          const CleanReference& ref, LossMetric metric, bool cross) {
    Tensor total;
    std::size_t count = 0;
    for (std::size_t s = 0; s < fwd.results.size(); ++s) {
        const std::vector<Tensor>& taps =
            cross ? fwd.results[s].taps.cross_attn : fwd.results[s].taps.self_attn;
        const std::vector<std::vector<double>>& clean =
            cross ? ref.steps[s].cross_taps : ref.steps[s].self_taps;
        if (taps.size() != clean.size())
            throw ContractError("attention tap count mismatch between model and reference");
        for (std::size_t l = 0; l < taps.size(); ++l) {
            Tensor term = attackdetail::metric_term(t, taps[l], clean[l], metric);
            total = total.valid() ? t.add(total, term) : term;
            ++count;
        }
    }
    return t.scale(total, 1.0 / static_cast<double>(count));
}

inline Tensor combined_loss_t(Tape& t, const PolicyModel& model, const CleanReference& ref,
                              const LossSpec& spec, const ForwardOptions& opt,
                              bool first_step_only = false) {
    spec.validate();
    const attackdetail::StepForwards fwd =
        attackdetail::forward_all(t, model, ref, opt, first_step_only);
    Tensor total;
    auto acc = [&](Tensor term, double w) {
        term = t.scale(term, w);
        total = total.valid() ? t.add(total, term) : term;
    };
    if (spec.discrete) acc(loss_discrete_t(t, fwd, ref), 1.0);
    if (spec.continuous) acc(loss_continuous_t(t, fwd, ref, spec.metric), spec.alpha);
    if (spec.self_attn) acc(loss_attn_t(t, fwd, ref, spec.metric, false), spec.beta);
    if (spec.cross_attn) acc(loss_attn_t(t, fwd, ref, spec.metric, true), spec.beta);
    return total;
}

// ---- scalar conveniences over token-id prefixes --------------------------------

namespace attackdetail {

inline std::vector<double> onehot_rows(const std::vector<int>& ids, int vocab_size) {
    std::vector<double> m(ids.size() * static_cast<std::size_t>(vocab_size), 0.0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= vocab_size) throw ContractError("token id outside vocabulary");
        m[i * vocab_size + ids[i]] = 1.0;
    }
    return m;
}

inline ForwardOptions prefix_options(Tape& t, const std::vector<int>& prefix_ids, int vocab_size,
                                     bool requires_grad) {
    ForwardOptions opt;
    if (!prefix_ids.empty()) {
        const int L = static_cast<int>(prefix_ids.size());
        std::vector<double> rows = onehot_rows(prefix_ids, vocab_size);
        opt.prefix_onehot = requires_grad ? t.leaf(std::vector<int>{L, vocab_size}, rows, true)
                                          : t.constant({L, vocab_size}, rows);
    }
    return opt;
}

}  // namespace attackdetail

inline double combined_loss(const PolicyModel& model, const std::vector<int>& prefix_ids,
                            const CleanReference& ref, const LossSpec& spec,
                            bool first_step_only = false) {
    Tape t;
    const ForwardOptions opt =
        attackdetail::prefix_options(t, prefix_ids, model.config().vocab_size, false);
    return combined_loss_t(t, model, ref, spec, opt, first_step_only).scalar();
}

inline double loss_discrete(const PolicyModel& model, const std::vector<int>& prefix_ids,
                            const CleanReference& ref) {
    LossSpec s{true, false, false, false};
    return combined_loss(model, prefix_ids, ref, s);
}

inline double loss_continuous(const PolicyModel& model, const std::vector<int>& prefix_ids,
                              const CleanReference& ref, LossMetric metric = LossMetric::cosine) {
    LossSpec s{false, true, false, false};
    s.metric = metric;
    s.alpha = 1.0;
    return combined_loss(model, prefix_ids, ref, s);
}

inline double loss_self_attn(const PolicyModel& model, const std::vector<int>& prefix_ids,
                             const CleanReference& ref, LossMetric metric = LossMetric::cosine) {
    LossSpec s{false, false, true, false};
    s.metric = metric;
    s.beta = 1.0;
    return combined_loss(model, prefix_ids, ref, s);
}

inline double loss_cross_attn(const PolicyModel& model, const std::vector<int>& prefix_ids,
                              const CleanReference& ref, LossMetric metric = LossMetric::cosine) {
    LossSpec s{false, false, false, true};
    s.metric = metric;
    s.beta = 1.0;
    return combined_loss(model, prefix_ids, ref, s);
}

// ---- one-hot token gradient ------------------------------------------------------

// Row i holds d(combined_loss)/d(one-hot of prefix position i). Columns of
// tokens outside attackable_ids are masked to +inf so ranking never picks
// them.
inline std::vector<double> onehot_gradient(const PolicyModel& model,
                                           const std::vector<int>& prefix_ids,
                                           const CleanReference& ref, const LossSpec& spec,
                                           const Vocab& vocab, bool first_step_only = false,
                                           bool masked = true) {
    if (prefix_ids.empty()) throw ContractError("one-hot gradient needs a nonempty prefix");
    const int V = model.config().vocab_size;
    Tape t;
    const ForwardOptions opt = attackdetail::prefix_options(t, prefix_ids, V, true);
    Tensor loss = combined_loss_t(t, model, ref, spec, opt, first_step_only);
    t.backward(loss);
    std::vector<double> g = opt.prefix_onehot.grad();
    if (masked) {
        std::vector<bool> attackable(V, false);
        for (int id : vocab.attackable_ids) attackable[id] = true;
        const double inf = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < prefix_ids.size(); ++i)
            for (int v = 0; v < V; ++v)
                if (!attackable[v]) g[i * V + v] = inf;
    }
    return g;
}

// ---- optimizers -------------------------------------------------------------------

inline AdversarialPrefix random_prefix(const Vocab& vocab, const AttackConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.rng_seed, "random_prefix"));
    AdversarialPrefix p;
    p.method = "random";
    p.seed = cfg.rng_seed;
    for (int i = 0; i < cfg.prefix_length; ++i)
        p.token_ids.push_back(
            vocab.attackable_ids[rng.next_below(vocab.attackable_ids.size())]);
    return p;
}

namespace attackdetail {

// g_t = grad_t + mu * g_{t-1}
inline std::vector<double> momentum_accumulate(const std::vector<double>& grad,
                                               const std::vector<double>& g_prev, double mu) {
    std::vector<double> g = grad;
    if (mu != 0.0 && !g_prev.empty()) {
        if (g_prev.size() != g.size()) throw ContractError("momentum buffer size mismatch");
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += mu * g_prev[i];
    }
    return g;
}

// Greedy coordinate descent core. mu = 0 reproduces the plain variant
// step for step; mu > 0 ranks candidates by the momentum-accumulated
// gradient while still selecting by true evaluated loss.
inline AdversarialPrefix gcg_core(const PolicyModel& model, const CleanReference& ref,
                                  const LossSpec& spec, const AttackConfig& cfg,
                                  const Vocab& vocab, double mu, const std::string& method) {
    cfg.validate();
    spec.validate();
    const int V = model.config().vocab_size;
    const int L = cfg.prefix_length;
    const int k = std::min<int>(cfg.top_k, static_cast<int>(vocab.attackable_ids.size()));

    AdversarialPrefix out;
    out.method = method;
    out.seed = cfg.rng_seed;
    out.source_demo_id = ref.demo_id;

    Rng init_rng(derive_seed(cfg.rng_seed, "prefix_init"));
    std::vector<int> prefix(L);
    for (int& id : prefix)
        id = vocab.attackable_ids[init_rng.next_below(vocab.attackable_ids.size())];

    double incumbent_loss = combined_loss(model, prefix, ref, spec, cfg.first_step_only);
    out.loss_trace.push_back(incumbent_loss);

    std::vector<double> g_prev;
    for (int step = 0; step < cfg.steps; ++step) {
        const std::vector<double> grad = momentum_accumulate(
            onehot_gradient(model, prefix, ref, spec, vocab, cfg.first_step_only,
                            /*masked=*/false),
            g_prev, mu);
        g_prev = grad;

        // per-position top-k attackable ids by most-negative (momentum) gradient
        std::vector<std::vector<int>> topk(L);
        for (int i = 0; i < L; ++i) {
            std::vector<int> ids = vocab.attackable_ids;
            std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
                const double ga = grad[static_cast<std::size_t>(i) * V + a];
                const double gb = grad[static_cast<std::size_t>(i) * V + b];
                if (ga != gb) return ga < gb;
                return a < b;
            });
            ids.resize(k);
            topk[i] = std::move(ids);
        }

        // candidate set: incumbent first, then single-token swaps
        std::vector<std::vector<int>> candidates = {prefix};
        if (cfg.batch_size >= L * k) {
            for (int i = 0; i < L; ++i)
                for (int id : topk[i]) {
                    std::vector<int> c = prefix;
                    c[i] = id;
                    candidates.push_back(std::move(c));
                }
        } else {
            Rng rng(derive_seed(cfg.rng_seed, "gcg_candidates", static_cast<std::uint64_t>(step)));
            for (int b = 0; b < cfg.batch_size; ++b) {
                const int i = static_cast<int>(rng.next_below(static_cast<std::size_t>(L)));
                const int id = topk[i][rng.next_below(static_cast<std::size_t>(k))];
                std::vector<int> c = prefix;
                c[i] = id;
                candidates.push_back(std::move(c));
            }
        }

        std::size_t best = 0;
        double best_loss = incumbent_loss;
        for (std::size_t c = 1; c < candidates.size(); ++c) {
            const double l = combined_loss(model, candidates[c], ref, spec, cfg.first_step_only);
            if (l < best_loss) {
                best_loss = l;
                best = c;
            }
        }
        prefix = candidates[best];
        incumbent_loss = best_loss;
        out.loss_trace.push_back(incumbent_loss);
    }
    out.token_ids = prefix;
    out.final_loss = incumbent_loss;
    return out;
}

}  // namespace attackdetail

inline AdversarialPrefix gcg_optimize(const PolicyModel& model, const CleanReference& ref,
                                      const LossSpec& spec, const AttackConfig& cfg,
                                      const Vocab& vocab = Vocab::standard()) {
    return attackdetail::gcg_core(model, ref, spec, cfg, vocab, 0.0, "gcg");
}

inline AdversarialPrefix momentum_gcg_optimize(const PolicyModel& model, const CleanReference& ref,
                                               const LossSpec& spec, const AttackConfig& cfg,
                                               const Vocab& vocab = Vocab::standard()) {
    return attackdetail::gcg_core(model, ref, spec, cfg, vocab, cfg.momentum_weight, "mgcg");
}

// Nearest attackable token to an embedding vector under cosine similarity.
inline int project_embedding(const PolicyModel& model, const std::vector<double>& vec,
                             const Vocab& vocab) {
    const Param& emb = model.params().at("tok_embed");
    const int d = model.config().hidden_dim;
    int best = -1;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (int id : vocab.attackable_ids) {
        double dot = 0, na = 0, nb = 0;
        for (int j = 0; j < d; ++j) {
            const double a = vec[j], b = emb.value[static_cast<std::size_t>(id) * d + j];
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        if (na == 0.0 || nb == 0.0) throw DegenerateInputError("zero-norm embedding in projection");
        const double sim = dot / (std::sqrt(na) * std::sqrt(nb));
        if (sim > best_sim) {
            best_sim = sim;
            best = id;
        }
    }
    return best;
}

// Continuous relaxation: free embedding vectors at the prefix positions,
// plain gradient descent, then a final cosine projection back to tokens.
// The projection can undo the optimization; the post-projection loss is
// reported as final_loss without any monotonicity claim.
inline AdversarialPrefix gd_optimize(const PolicyModel& model, const CleanReference& ref,
                                     const LossSpec& spec, const AttackConfig& cfg,
                                     const Vocab& vocab = Vocab::standard()) {
    cfg.validate();
    spec.validate();
    const int d = model.config().hidden_dim;
    const int L = cfg.prefix_length;
    const Param& emb = model.params().at("tok_embed");

    Rng rng(derive_seed(cfg.rng_seed, "gd_init"));
    std::vector<double> embeds(static_cast<std::size_t>(L) * d);
    for (int i = 0; i < L; ++i) {
        const int id = vocab.attackable_ids[rng.next_below(vocab.attackable_ids.size())];
        for (int j = 0; j < d; ++j)
            embeds[static_cast<std::size_t>(i) * d + j] =
                emb.value[static_cast<std::size_t>(id) * d + j];
    }

    AdversarialPrefix out;
    out.method = "gd";
    out.seed = cfg.rng_seed;
    out.source_demo_id = ref.demo_id;

    for (int epoch = 0; epoch < cfg.gd_epochs; ++epoch) {
        Tape t;
        ForwardOptions opt;
        opt.prefix_embeds = t.leaf_view({L, d}, embeds.data(), true);
        Tensor loss = combined_loss_t(t, model, ref, spec, opt, cfg.first_step_only);
        out.loss_trace.push_back(loss.scalar());
        t.backward(loss);
        const std::vector<double> g = opt.prefix_embeds.grad();
        for (std::size_t i = 0; i < embeds.size(); ++i) embeds[i] -= cfg.gd_learning_rate * g[i];
    }

    for (int i = 0; i < L; ++i) {
        std::vector<double> row(embeds.begin() + static_cast<std::ptrdiff_t>(i) * d,
                                embeds.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);
        out.token_ids.push_back(project_embedding(model, row, vocab));
    }
    out.final_loss = combined_loss(model, out.token_ids, ref, spec, cfg.first_step_only);
    out.loss_trace.push_back(out.final_loss);
    return out;
}

// ---- prefix artifact file ------------------------------------------------------------
//
//   prefix v1
//   method <name> seed <u64> source_demo <id> length <n>
//   spec terms <t1,t2> alpha <a> beta <b> metric <m>
//   final_loss <v>
//   tokens <id>...
//   text <word>...
//   trace <n> <v>...

inline std::string serialize_prefix(const AdversarialPrefix& p, const LossSpec& spec,
                                    const Vocab& vocab = Vocab::standard()) {
    std::ostringstream s;
    s << "prefix v1\n";
    s << "method " << p.method << " seed " << p.seed << " source_demo " << p.source_demo_id
      << " length " << p.token_ids.size() << "\n";
    s << "spec terms " << spec.terms_string() << " alpha " << sim::detail::fmt_double(spec.alpha)
      << " beta " << sim::detail::fmt_double(spec.beta) << " metric " << metric_name(spec.metric)
      << "\n";
    s << "final_loss " << sim::detail::fmt_double(p.final_loss) << "\n";
    s << "tokens";
    for (int id : p.token_ids) s << " " << id;
    s << "\ntext";
    for (int id : p.token_ids) s << " " << vocab.tokens.at(id);
    s << "\ntrace " << p.loss_trace.size();
    for (double v : p.loss_trace) s << " " << sim::detail::fmt_double(v);
    s << "\n";
    return s.str();
}

inline AdversarialPrefix parse_prefix(const std::string& text, LossSpec* spec_out = nullptr) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "prefix v1")
        throw ArtifactError("prefix artifact: bad header");
    AdversarialPrefix p;
    std::size_t length = 0;
    {
        std::string kw;
        std::getline(in, line);
        std::istringstream s(line);
        s >> kw >> p.method >> kw >> p.seed >> kw >> p.source_demo_id >> kw >> length;
        if (!s) throw ArtifactError("prefix artifact: bad method line");
    }
    {
        std::getline(in, line);
        std::istringstream s(line);
        std::string kw, terms, metric;
        LossSpec spec;
        s >> kw >> kw >> terms >> kw >> spec.alpha >> kw >> spec.beta >> kw >> metric;
        if (!s) throw ArtifactError("prefix artifact: bad spec line");
        spec.discrete = terms.find("discrete") != std::string::npos;
        spec.continuous = terms.find("continuous") != std::string::npos;
        spec.self_attn = terms.find("self_attn") != std::string::npos;
        spec.cross_attn = terms.find("cross_attn") != std::string::npos;
        spec.metric = metric == "cosine" ? LossMetric::cosine : LossMetric::squared_l2;
        if (spec_out) *spec_out = spec;
    }
    {
        std::getline(in, line);
        std::istringstream s(line);
        std::string kw;
        s >> kw >> p.final_loss;
        if (kw != "final_loss" || !s) throw ArtifactError("prefix artifact: bad loss line");
    }
    {
        std::getline(in, line);
        std::istringstream s(line);
        std::string kw;
        s >> kw;
        if (kw != "tokens") throw ArtifactError("prefix artifact: bad tokens line");
        int id;
        while (s >> id) p.token_ids.push_back(id);
        if (p.token_ids.size() != length) throw ArtifactError("prefix artifact: length mismatch");
    }
    std::getline(in, line);  // text line, informational
    {
        std::getline(in, line);
        std::istringstream s(line);
        std::string kw;
        std::size_t n = 0;
        s >> kw >> n;
        if (kw != "trace" || !s) throw ArtifactError("prefix artifact: bad trace line");
        p.loss_trace.resize(n);
        for (double& v : p.loss_trace) s >> v;
        if (!s) throw ArtifactError("prefix artifact: truncated trace");
    }
    return p;
}

}  // namespace pbench
