#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "prefixbench/episode.hpp"
#include "prefixbench/policy.hpp"
#include "prefixbench/prompt.hpp"
#include "prefixbench/simworld.hpp"

namespace pbench {

// Imitation learning: expert dataset generation and behavior cloning of the
// policy onto the oracle's discretized actions.

struct TrainConfig {
    int demos_per_task = 200;
    int epochs = 300;
    double learning_rate = 3e-3;
    int batch_size = 32;
    std::uint64_t rng_seed = 0;
    std::vector<sim::TaskType> task_types = sim::all_tasks();

    void validate() const {
        if (demos_per_task <= 0 || epochs <= 0 || batch_size <= 0)
            throw ContractError("train config: counts must be positive");
    }
};

struct Demonstration {
    int demo_id = 0;
    sim::TaskInstance task;
    // (scene before the action, expert action) per step
    std::vector<std::pair<sim::Scene, sim::ContinuousAction>> steps;
    PromptSequence prompt;
};

inline Demonstration make_demonstration(const sim::TaskInstance& task, int demo_id,
                                        const Vocab& vocab = Vocab::standard()) {
    Demonstration d;
    d.demo_id = demo_id;
    d.task = task;
    d.prompt = tokenize(vocab, task.instruction);
    std::vector<sim::Scene> scenes = {task.scene};
    for (int s = 0; s < task.oracle_steps; ++s) {
        const sim::ContinuousAction a = sim::oracle_action(task, scenes.back());
        d.steps.push_back({scenes.back(), a});
        scenes.push_back(sim::apply_action(scenes.back(), a).first);
    }
    const sim::EpisodeOutcome check = sim::judge(task, scenes);
    if (!check.success || check.unintended_interaction)
        throw GenerationError("demonstration replay failed the judge");
    return d;
}

inline std::vector<Demonstration> generate_dataset(const TrainConfig& cfg,
                                                   const Vocab& vocab = Vocab::standard()) {
    cfg.validate();
    std::vector<Demonstration> out;
    int demo_id = 0;
    for (sim::TaskType type : cfg.task_types) {
        const std::string tag = std::string("dataset:") + sim::task_name(type);
        for (int i = 0; i < cfg.demos_per_task; ++i) {
            const sim::TaskInstance task =
                sim::sample_task(type, derive_seed(cfg.rng_seed, tag, static_cast<std::uint64_t>(i)));
            out.push_back(make_demonstration(task, demo_id++, vocab));
        }
    }
    return out;
}

// ---- dataset line format -----------------------------------------------------
// demo <id> actions <n> {pick_x pick_y place_x place_y}... <task record>
// Scenes are reconstructed by replaying the actions from the task's scene.

inline std::string serialize_demo(const Demonstration& d) {
    std::ostringstream s;
    s << "demo " << d.demo_id << " actions " << d.steps.size();
    for (const auto& [scene, a] : d.steps)
        s << " " << sim::detail::fmt_double(a.pick_x) << " " << sim::detail::fmt_double(a.pick_y)
          << " " << sim::detail::fmt_double(a.place_x) << " " << sim::detail::fmt_double(a.place_y);
    s << " " << sim::serialize_task(d.task);
    return s.str();
}

inline Demonstration parse_demo(const std::string& line, const Vocab& vocab = Vocab::standard()) {
    std::istringstream s(line);
    std::string kw;
    s >> kw;
    if (kw != "demo") throw ArtifactError("demo record: expected 'demo'");
    int id = 0;
    std::size_t n = 0;
    s >> id >> kw >> n;
    if (kw != "actions" || !s) throw ArtifactError("demo record: bad actions header");
    std::vector<sim::ContinuousAction> actions(n);
    for (auto& a : actions) s >> a.pick_x >> a.pick_y >> a.place_x >> a.place_y;
    std::string rest;
    std::getline(s, rest);
    if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
    const sim::TaskInstance task = sim::parse_task(rest);

    Demonstration d;
    d.demo_id = id;
    d.task = task;
    d.prompt = tokenize(vocab, task.instruction);
    sim::Scene scene = task.scene;
    for (const sim::ContinuousAction& a : actions) {
        d.steps.push_back({scene, a});
        scene = sim::apply_action(scene, a).first;
    }
    return d;
}

// ---- gradient collection -------------------------------------------------------

namespace traindetail {

// After backward(), sum gradients of every tracked leaf into per-parameter
// buffers, keyed by the parameter's data pointer.
class GradAccumulator {
public:
    // pad_cols > 0 freezes the first pad_cols entries of the "tok_embed"
    // parameter (the pad token's row). Keeping the pad embedding at its zero
    // init means tokens whose rows never receive gradients stay exactly
    // equivalent to padding, so the attention suppression learned for pads
    // covers them too.
    explicit GradAccumulator(std::map<std::string, Param>& params, std::size_t pad_cols = 0) {
        for (auto& [name, p] : params) {
            buffers_[p.value.data()] = std::vector<double>(p.size(), 0.0);
            order_.push_back(&p);
            if (name == "tok_embed") frozen_[&p] = pad_cols;
        }
    }

    void add_from(const Tape& tape) {
        for (detail::Node* leaf : tape.external_leaves()) {
            if (!leaf->touched()) continue;
            auto it = buffers_.find(leaf->v());
            if (it == buffers_.end()) continue;
            std::vector<double>& buf = it->second;
            for (std::size_t i = 0; i < leaf->size; ++i) buf[i] += leaf->grad[i];
        }
    }

    void apply_sgd(double lr_over_batch) {
        for (Param* p : order_) {
            std::vector<double>& buf = buffers_[p->value.data()];
            auto fz = frozen_.find(p);
            const std::size_t skip = fz == frozen_.end() ? 0 : fz->second;
            for (std::size_t i = 0; i < p->size(); ++i) {
                if (i >= skip) p->value[i] -= lr_over_batch * buf[i];
                buf[i] = 0.0;
            }
        }
    }

private:
    std::unordered_map<const double*, std::vector<double>> buffers_;
    std::unordered_map<Param*, std::size_t> frozen_;
    std::vector<Param*> order_;
};

struct Sample {
    const Demonstration* demo;
    int step;
};

inline History history_for(const Demonstration& d, int step, int n_bins) {
    History h;
    for (int s = 0; s < step; ++s)
        h.push_back(HistoryStep{d.steps[s].first.objects,
                                discretize_action(d.steps[s].second, n_bins)});
    return h;
}

}  // namespace traindetail

// Behavior cloning: minimize the mean NLL of the oracle's four action bins
// under the policy's heads, by plain SGD. Returns the per-epoch loss curve.
inline std::vector<double> train(PolicyModel& model, const std::vector<Demonstration>& dataset,
                                 const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw ContractError("train: empty dataset");
    const int n_bins = model.config().n_bins;

    std::vector<traindetail::Sample> samples;
    for (const Demonstration& d : dataset)
        for (int s = 0; s < static_cast<int>(d.steps.size()); ++s) samples.push_back({&d, s});

    traindetail::GradAccumulator grads(model.params(),
                                       static_cast<std::size_t>(model.config().hidden_dim));
    std::vector<double> curve;
    curve.reserve(cfg.epochs);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // deterministic Fisher-Yates shuffle per epoch
        Rng rng(derive_seed(cfg.rng_seed, "train_shuffle", static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.next_below(i)]);

        double epoch_nll = 0.0;
        std::size_t batch_fill = 0;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const traindetail::Sample& smp = samples[order[pos]];
            const Demonstration& d = *smp.demo;
            const History h = traindetail::history_for(d, smp.step, n_bins);
            const std::array<int, 4> target = discretize_action(d.steps[smp.step].second, n_bins);

            Tape t;
            ForwardOptions opt;
            opt.weight_grads = true;
            const ForwardResult fr = model.forward(t, d.prompt, h, opt);
            Tensor nll;
            for (int k = 0; k < 4; ++k) {
                Tensor term = t.scale(t.pick(t.log_softmax_rows(fr.head_logits[k]), target[k]), -1.0);
                nll = k == 0 ? term : t.add(nll, term);
            }
            const double loss = nll.scalar();
            if (!std::isfinite(loss)) {
                std::ostringstream diag;
                diag << "training diverged: non-finite NLL at epoch " << epoch << ", demo "
                     << d.demo_id << ", step " << smp.step;
                throw DivergenceError(diag.str());
            }
            epoch_nll += loss;
            t.backward(nll);
            grads.add_from(t);
            ++batch_fill;

            if (batch_fill == static_cast<std::size_t>(cfg.batch_size) || pos + 1 == order.size()) {
                grads.apply_sgd(cfg.learning_rate / static_cast<double>(batch_fill));
                batch_fill = 0;
            }
        }
        curve.push_back(epoch_nll / static_cast<double>(samples.size()));
    }
    return curve;
}

// Fraction of freshly sampled instances the greedy policy solves. Instance
// seeds are domain-separated from dataset seeds, so held-out evaluation never
// replays training layouts.
inline std::uint64_t eval_instance_seed(std::uint64_t seed, sim::TaskType type, int episode) {
    return derive_seed(seed, std::string("eval_instance:") + sim::task_name(type),
                       static_cast<std::uint64_t>(episode));
}

inline double clean_success_rate(const PolicyModel& model, sim::TaskType task_type, int n_episodes,
                                 std::uint64_t seed) {
    int ok = 0;
    for (int i = 0; i < n_episodes; ++i) {
        const sim::TaskInstance task = sim::sample_task(task_type, eval_instance_seed(seed, task_type, i));
        if (run_episode(model, task).success) ++ok;
    }
    return static_cast<double>(ok) / n_episodes;
}

inline std::string serialize_loss_curve(const std::vector<double>& curve) {
    std::ostringstream s;
    for (std::size_t i = 0; i < curve.size(); ++i)
        s << i << " " << sim::detail::fmt_double(curve[i]) << "\n";
    return s.str();
}

}  // namespace pbench
