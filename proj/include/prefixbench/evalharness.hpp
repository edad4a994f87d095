#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "prefixbench/attack.hpp"
#include "prefixbench/episode.hpp"
#include "prefixbench/training.hpp"

namespace pbench {

// Experimental protocol: ASR grids across tasks and methods, token-length
// sweeps, the loss-term ablation matrix, and gray-box transfer between model
// variants. One optimization per (method, length, seed); every downstream
// cell reuses that prefix unchanged (universality).

struct EvalConfig {
    int n_demos_per_task = 50;  // full-scale protocol uses 150
    std::vector<std::uint64_t> seeds = {42, 22, 76};
    std::vector<std::string> methods = {"ours", "gcg", "mgcg", "gd", "random"};
    std::vector<int> prefix_lengths = {10, 25, 48};
    std::vector<sim::TaskType> tasks = sim::all_tasks();
    std::uint64_t eval_seed_root = 9000;  // instance seeds, disjoint from training

    void validate() const {
        if (n_demos_per_task < 1) throw ContractError("eval config: n_demos_per_task >= 1");
        if (seeds.empty() || methods.empty() || prefix_lengths.empty() || tasks.empty())
            throw ContractError("eval config: all lists must be nonempty");
    }
};

struct EvalCell {
    sim::TaskType task;
    std::string method;
    int length = 0;
    std::uint64_t seed = 0;
    double clean_rate = 0.0;
    double attacked_rate = 0.0;
    double asr = 0.0;
    std::vector<int> episode_failures;  // per-episode attacked outcome, 1 = judge failure
};

struct EvalReport {
    EvalConfig config;
    std::vector<EvalCell> cells;

    // unweighted mean ASR over tasks of the per-task seed means, per method
    double method_mean(const std::string& method) const {
        double total = 0.0;
        int n_tasks = 0;
        for (sim::TaskType task : config.tasks) {
            double s = 0.0;
            int n = 0;
            for (const EvalCell& c : cells)
                if (c.task == task && c.method == method) {
                    s += c.asr;
                    ++n;
                }
            if (n > 0) {
                total += s / n;
                ++n_tasks;
            }
        }
        if (n_tasks == 0) throw ContractError("no cells for method " + method);
        return total / n_tasks;
    }

    double task_method_mean(sim::TaskType task, const std::string& method) const {
        double s = 0.0;
        int n = 0;
        for (const EvalCell& c : cells)
            if (c.task == task && c.method == method) {
                s += c.asr;
                ++n;
            }
        if (n == 0) throw ContractError("no cells for task/method");
        return s / n;
    }
};

// ---- episode-level measurements --------------------------------------------------

inline sim::EpisodeOutcome run_attacked_episode(const PolicyModel& model,
                                                const std::vector<int>& prefix_ids,
                                                const sim::TaskInstance& task,
                                                const Vocab& vocab = Vocab::standard()) {
    return run_episode(model, task, prefix_ids, vocab);
}

// Fraction of seeded instances where the attacked policy fails the judge.
// Instance seeds match clean_success_rate's for the same root, so
// asr(empty prefix) == 1 - clean_success_rate exactly.
inline double asr(const PolicyModel& model, const std::vector<int>& prefix_ids,
                  sim::TaskType task_type, int n_episodes, std::uint64_t seed_root,
                  std::vector<int>* failures = nullptr, const Vocab& vocab = Vocab::standard()) {
    int failed = 0;
    for (int i = 0; i < n_episodes; ++i) {
        const sim::TaskInstance task =
            sim::sample_task(task_type, eval_instance_seed(seed_root, task_type, i));
        const bool fail = !run_attacked_episode(model, prefix_ids, task, vocab).success;
        failed += fail;
        if (failures) failures->push_back(fail ? 1 : 0);
    }
    return static_cast<double>(failed) / n_episodes;
}

// ---- method dispatch --------------------------------------------------------------

// "ours" = greedy coordinate machinery + feature loss (continuous + self-attn);
// the three baselines use the output-distribution loss.
inline LossSpec method_loss_spec(const std::string& method) {
    if (method == "ours") return LossSpec::ours();
    if (method == "gcg" || method == "mgcg" || method == "gd" || method == "random")
        return LossSpec::discrete_only();
    throw ContractError("unknown attack method: " + method);
}

inline AdversarialPrefix optimize_prefix(const std::string& method, const PolicyModel& model,
                                         const CleanReference& ref, const AttackConfig& cfg,
                                         const Vocab& vocab = Vocab::standard()) {
    const LossSpec spec = method_loss_spec(method);
    if (method == "ours") {
        AdversarialPrefix p = gcg_optimize(model, ref, spec, cfg, vocab);
        p.method = "ours";
        return p;
    }
    if (method == "gcg") return gcg_optimize(model, ref, spec, cfg, vocab);
    if (method == "mgcg") return momentum_gcg_optimize(model, ref, spec, cfg, vocab);
    if (method == "gd") return gd_optimize(model, ref, spec, cfg, vocab);
    if (method == "random") {
        AdversarialPrefix p = random_prefix(vocab, cfg);
        p.source_demo_id = ref.demo_id;
        p.final_loss = combined_loss(model, p.token_ids, ref, spec);
        return p;
    }
    throw ContractError("unknown attack method: " + method);
}

// The shared source demonstration every prefix is optimized on (a
// visual_manipulation instance, seed-separated from training and evaluation).
inline Demonstration attack_source_demo(std::uint64_t root_seed = 0,
                                        const Vocab& vocab = Vocab::standard()) {
    const sim::TaskInstance task = sim::sample_task(
        sim::TaskType::visual_manipulation, derive_seed(root_seed, "attack_source"));
    return make_demonstration(task, 0, vocab);
}

// key: (method, length, seed)
using PrefixGrid = std::map<std::tuple<std::string, int, std::uint64_t>, AdversarialPrefix>;

inline PrefixGrid optimize_grid(const PolicyModel& model, const CleanReference& ref,
                                const EvalConfig& eval_cfg, const AttackConfig& base_cfg,
                                const Vocab& vocab = Vocab::standard()) {
    eval_cfg.validate();
    PrefixGrid grid;
    for (const std::string& method : eval_cfg.methods)
        for (int length : eval_cfg.prefix_lengths)
            for (std::uint64_t seed : eval_cfg.seeds) {
                AttackConfig cfg = base_cfg;
                cfg.prefix_length = length;
                cfg.rng_seed = seed;
                grid[{method, length, seed}] = optimize_prefix(method, model, ref, cfg, vocab);
            }
    return grid;
}

// Full cross-product evaluation of precomputed prefixes; the same prefix is
// reused across all tasks without re-optimization.
inline EvalReport evaluate_grid(const PolicyModel& model, const PrefixGrid& grid,
                                const EvalConfig& eval_cfg,
                                const Vocab& vocab = Vocab::standard()) {
    eval_cfg.validate();
    EvalReport report;
    report.config = eval_cfg;
    std::map<sim::TaskType, double> clean;
    for (sim::TaskType task : eval_cfg.tasks)
        clean[task] = clean_success_rate(model, task, eval_cfg.n_demos_per_task,
                                         eval_cfg.eval_seed_root);
    for (const auto& [key, prefix] : grid) {
        const auto& [method, length, seed] = key;
        for (sim::TaskType task : eval_cfg.tasks) {
            EvalCell cell;
            cell.task = task;
            cell.method = method;
            cell.length = length;
            cell.seed = seed;
            cell.clean_rate = clean[task];
            cell.asr = asr(model, prefix.token_ids, task, eval_cfg.n_demos_per_task,
                           eval_cfg.eval_seed_root, &cell.episode_failures, vocab);
            cell.attacked_rate = 1.0 - cell.asr;
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

// ---- protocol front ends -----------------------------------------------------------

// ASR grid across tasks and methods at a single prefix length.
inline EvalReport compare_methods(const PolicyModel& model, const EvalConfig& eval_cfg,
                                  const AttackConfig& base_cfg, int length = 25,
                                  const Vocab& vocab = Vocab::standard()) {
    EvalConfig cfg = eval_cfg;
    cfg.prefix_lengths = {length};
    const Demonstration demo = attack_source_demo(0, vocab);
    const CleanReference ref = build_clean_reference(model, demo);
    return evaluate_grid(model, optimize_grid(model, ref, cfg, base_cfg, vocab), cfg, vocab);
}

// mean ASR per (method, length), seed- and task-averaged
inline std::map<std::string, std::map<int, double>> length_sweep_table(const EvalReport& report) {
    std::map<std::string, std::map<int, double>> out;
    for (const std::string& method : report.config.methods)
        for (int length : report.config.prefix_lengths) {
            double s = 0.0;
            int n = 0;
            for (const EvalCell& c : report.cells)
                if (c.method == method && c.length == length) {
                    s += c.asr;
                    ++n;
                }
            if (n > 0) out[method][length] = s / n;
        }
    return out;
}

inline EvalReport length_sweep(const PolicyModel& model, const EvalConfig& eval_cfg,
                               const AttackConfig& base_cfg,
                               const Vocab& vocab = Vocab::standard()) {
    const Demonstration demo = attack_source_demo(0, vocab);
    const CleanReference ref = build_clean_reference(model, demo);
    return evaluate_grid(model, optimize_grid(model, ref, eval_cfg, base_cfg, vocab), eval_cfg,
                         vocab);
}

// Loss-term ablation: same greedy optimizer throughout, four feature sets.
inline const std::vector<std::pair<std::string, LossSpec>>& ablation_specs() {
    static const std::vector<std::pair<std::string, LossSpec>> specs = {
        {"discrete", LossSpec::discrete_only()},
        {"continuous", LossSpec::continuous_only()},
        {"continuous+cross_attn", LossSpec::continuous_cross()},
        {"continuous+self_attn", LossSpec::ours()},
    };
    return specs;
}

inline EvalReport ablation_matrix(const PolicyModel& model, const EvalConfig& eval_cfg,
                                  const AttackConfig& base_cfg,
                                  const Vocab& vocab = Vocab::standard()) {
    eval_cfg.validate();
    const Demonstration demo = attack_source_demo(0, vocab);
    const CleanReference ref = build_clean_reference(model, demo);
    PrefixGrid grid;
    EvalConfig cfg = eval_cfg;
    cfg.methods.clear();
    for (const auto& [name, spec] : ablation_specs()) {
        cfg.methods.push_back(name);
        for (int length : cfg.prefix_lengths)
            for (std::uint64_t seed : cfg.seeds) {
                AttackConfig acfg = base_cfg;
                acfg.prefix_length = length;
                acfg.rng_seed = seed;
                AdversarialPrefix p = gcg_optimize(model, ref, spec, acfg, vocab);
                p.method = name;
                grid[{name, length, seed}] = std::move(p);
            }
    }
    return evaluate_grid(model, grid, cfg, vocab);
}

// Gray-box transfer: prefixes optimized on the source model, measured on the
// target model. No re-optimization; token ids are reused byte for byte.
inline EvalReport transfer_eval(const PolicyModel& source, const PolicyModel& target,
                                const PrefixGrid& source_grid, const EvalConfig& eval_cfg,
                                const Vocab& vocab = Vocab::standard()) {
    if (source.config().vocab_size != target.config().vocab_size)
        throw ContractError("transfer: source and target vocabulary sizes differ");
    (void)source;
    return evaluate_grid(target, source_grid, eval_cfg, vocab);
}

// ---- report writers --------------------------------------------------------------
//
// (a) delimiter-separated grid, tasks as rows and methods as columns;
// (b) structured dump with per-episode outcomes;
// (c) two-column numeric plot data per curve.
// Full-scale study numbers appear as reference annotations only, never as
// pass/fail targets.

inline std::string write_asr_table(const EvalReport& report, const std::string& title) {
    std::ostringstream s;
    s << "# " << title << "\n";
    s << "# cell: mean ASR over seeds";
    s << " (seeds";
    for (auto seed : report.config.seeds) s << " " << seed;
    s << "; " << report.config.n_demos_per_task << " episodes/task)\n";
    s << "task";
    for (const std::string& m : report.config.methods) s << "\t" << m;
    s << "\n";
    for (sim::TaskType task : report.config.tasks) {
        s << sim::task_name(task);
        for (const std::string& m : report.config.methods)
            s << "\t" << sim::detail::fmt_double(report.task_method_mean(task, m));
        s << "\n";
    }
    s << "avg";
    for (const std::string& m : report.config.methods)
        s << "\t" << sim::detail::fmt_double(report.method_mean(m));
    s << "\n";
    return s.str();
}

inline std::string write_full_dump(const EvalReport& report) {
    std::ostringstream s;
    s << "# per-cell dump: task method length seed clean attacked asr episodes...\n";
    for (const EvalCell& c : report.cells) {
        s << sim::task_name(c.task) << " " << c.method << " " << c.length << " " << c.seed << " "
          << sim::detail::fmt_double(c.clean_rate) << " "
          << sim::detail::fmt_double(c.attacked_rate) << " " << sim::detail::fmt_double(c.asr);
        for (int f : c.episode_failures) s << " " << f;
        s << "\n";
    }
    return s.str();
}

inline std::string write_plot_data(const std::map<int, double>& curve) {
    std::ostringstream s;
    for (const auto& [x, y] : curve) s << x << " " << sim::detail::fmt_double(y) << "\n";
    return s.str();
}

}  // namespace pbench
