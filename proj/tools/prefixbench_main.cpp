// prefixbench: train a toy language-conditioned manipulation policy, attack
// it with universal adversarial prefixes, and reproduce the evaluation
// protocol (method comparison, ablations, length sweeps, transfer).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prefixbench/config.hpp"
#include "prefixbench/evalharness.hpp"
#include "prefixbench/gradcheck_suite.hpp"

namespace {

using namespace pbench;

// ---- shared option plumbing ----------------------------------------------------

struct CommonOpts {
    std::string workspace;
    std::string profile = "desk";
    std::string config_file;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--workspace", o.workspace,
                    "artifact root (default: $PREFIXBENCH_WORKSPACE or ./workspace)");
    cmd->add_option("--profile", o.profile, "paper, desk, or ci")->capture_default_str();
    cmd->add_option("--config", o.config_file, "key = value config file");
    cmd->add_option("--threads", o.threads, "worker cap (execution is sequential)");
}

RunConfig make_run_config(const CommonOpts& o) {
    RunConfig rc;
    rc.profile = parse_profile(o.profile);
    rc.apply_profile();
    if (!o.config_file.empty()) apply_config(rc, parse_config_text(read_file(o.config_file)));
    if (!o.workspace.empty()) {
        rc.workspace = o.workspace;
    } else if (const char* env = std::getenv("PREFIXBENCH_WORKSPACE")) {
        rc.workspace = env;
    }
    if (o.threads > 0) rc.threads = o.threads;
    return rc;
}

std::string dataset_path(const RunConfig& rc) {
    return rc.datasets_dir() + "/dataset_" + profile_name(rc.profile) + ".txt";
}

std::string checkpoint_ref_path(const RunConfig& rc, const std::string& variant) {
    return rc.checkpoints_dir() + "/" + variant + "_" + profile_name(rc.profile) + ".ref";
}

std::string resolve_checkpoint(const RunConfig& rc, const std::string& variant) {
    const std::string ref = checkpoint_ref_path(rc, variant);
    if (!std::filesystem::exists(ref))
        throw ArtifactError("no " + variant + " checkpoint found; expected pointer file " + ref +
                            " (run the train command first)");
    std::string name = read_file(ref);
    while (!name.empty() && (name.back() == '\n' || name.back() == '\r')) name.pop_back();
    return rc.checkpoints_dir() + "/" + name;
}

std::vector<Demonstration> load_dataset(const RunConfig& rc) {
    const std::string path = dataset_path(rc);
    if (!std::filesystem::exists(path))
        throw ArtifactError("no dataset found at " + path + " (run gen-data first)");
    std::istringstream in(read_file(path));
    std::vector<Demonstration> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line.rfind("demo ", 0) == 0) out.push_back(parse_demo(line));
    return out;
}

std::string prefix_path(const RunConfig& rc, const std::string& method, int length,
                        std::uint64_t seed) {
    std::ostringstream s;
    s << rc.prefixes_dir() << "/" << method << "_len" << length << "_seed" << seed << "_"
      << profile_name(rc.profile) << ".txt";
    return s.str();
}

std::vector<sim::TaskType> parse_tasks(const std::string& csv) {
    if (csv == "all") return sim::all_tasks();
    std::vector<sim::TaskType> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(sim::task_from_name(item));
    if (out.empty()) throw ContractError("empty task list");
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stoull(item));
    if (out.empty()) throw ContractError("empty seed list");
    return out;
}

// provenance header embedded in every derived artifact
std::string provenance(const RunConfig& rc,
                       const std::vector<std::pair<std::string, std::string>>& inputs) {
    std::ostringstream s;
    s << "# prefixbench artifact\n";
    std::istringstream cfg(describe_config(rc));
    std::string line;
    while (std::getline(cfg, line)) s << "# config " << line << "\n";
    for (const auto& [name, content] : inputs)
        s << "# input " << name << " " << digest_hex(content) << "\n";
    return s.str();
}

// ---- subcommands -------------------------------------------------------------------

int cmd_gen_data(const CommonOpts& common, const std::string& tasks_csv, int demos, int seed) {
    RunConfig rc = make_run_config(common);
    if (demos > 0) rc.train.demos_per_task = demos;
    rc.train.rng_seed = seed;
    rc.train.task_types = parse_tasks(tasks_csv);
    rc.train.validate();

    const auto dataset = generate_dataset(rc.train);
    std::ostringstream body;
    for (const Demonstration& d : dataset) body << serialize_demo(d) << "\n";
    const std::string data = body.str();
    write_file(dataset_path(rc), data);

    std::ostringstream manifest;
    manifest << provenance(rc, {});
    manifest << "dataset "
             << std::filesystem::path(dataset_path(rc)).lexically_relative(rc.workspace).string()
             << "\n";
    manifest << "demos_per_task " << rc.train.demos_per_task << "\n";
    manifest << "seed " << seed << "\n";
    manifest << "count " << dataset.size() << "\n";
    manifest << "digest " << digest_hex(data) << "\n";
    write_file(dataset_path(rc) + ".manifest", manifest.str());
    std::cout << "wrote " << dataset.size() << " demonstrations to " << dataset_path(rc)
              << " (digest " << digest_hex(data) << ")\n";
    return 0;
}

int cmd_train(const CommonOpts& common, const std::string& variant, int epochs, int init_seed) {
    RunConfig rc = make_run_config(common);
    if (epochs > 0) rc.train.epochs = epochs;
    const auto dataset = load_dataset(rc);
    const std::string dataset_bytes = read_file(dataset_path(rc));

    PolicyModel model(rc.model_config(variant), static_cast<std::uint64_t>(init_seed));
    const auto curve = train(model, dataset, rc.train);

    std::ostringstream blob;
    model.save(blob);
    const std::string digest = digest_hex(blob.str());
    const std::string name = variant + "_" + profile_name(rc.profile) + "_" + digest + ".ckpt";
    write_file(rc.checkpoints_dir() + "/" + name, blob.str());
    write_file(checkpoint_ref_path(rc, variant), name + "\n");

    std::ostringstream curve_text;
    curve_text << provenance(rc, {{"dataset", dataset_bytes}});
    curve_text << serialize_loss_curve(curve);
    write_file(rc.checkpoints_dir() + "/" + variant + "_" + profile_name(rc.profile) +
                   "_loss_curve.txt",
               curve_text.str());

    std::cout << "checkpoint " << name << "\n";
    std::cout << "final training loss " << sim::detail::fmt_double(curve.back()) << "\n";
    for (sim::TaskType t : rc.train.task_types)
        std::cout << "clean success " << sim::task_name(t) << " "
                  << sim::detail::fmt_double(clean_success_rate(
                         model, t, rc.eval.n_demos_per_task, rc.eval.eval_seed_root))
                  << "\n";
    return 0;
}

int cmd_attack(const CommonOpts& common, const std::string& method, int length,
               std::uint64_t seed, const std::string& variant) {
    RunConfig rc = make_run_config(common);
    rc.attack.prefix_length = length;
    rc.attack.rng_seed = seed;
    rc.attack.validate();

    const std::string ckpt_path = resolve_checkpoint(rc, variant);
    const std::string ckpt_bytes = read_file(ckpt_path);
    std::istringstream ckpt_in(ckpt_bytes);
    const PolicyModel model = PolicyModel::load(ckpt_in);

    const Demonstration demo = attack_source_demo();
    const CleanReference ref = build_clean_reference(model, demo);
    const AdversarialPrefix p = optimize_prefix(method, model, ref, rc.attack);
    const LossSpec spec = method_loss_spec(method);

    std::ostringstream artifact;
    artifact << provenance(rc, {{"checkpoint", ckpt_bytes}});
    artifact << serialize_prefix(p, spec);
    write_file(prefix_path(rc, method, length, seed), artifact.str());
    std::cout << "wrote " << prefix_path(rc, method, length, seed) << " final_loss "
              << sim::detail::fmt_double(p.final_loss) << "\n";
    return 0;
}

AdversarialPrefix load_prefix(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line, body;
    while (std::getline(in, line))
        if (line.empty() || line[0] != '#') body += line + "\n";
    return parse_prefix(body);
}

PrefixGrid load_or_optimize_grid(const RunConfig& rc, const PolicyModel& model,
                                 const EvalConfig& ecfg) {
    const Demonstration demo = attack_source_demo();
    const CleanReference ref = build_clean_reference(model, demo);
    PrefixGrid grid;
    for (const std::string& method : ecfg.methods)
        for (int length : ecfg.prefix_lengths)
            for (std::uint64_t seed : ecfg.seeds) {
                const std::string path = prefix_path(rc, method, length, seed);
                if (std::filesystem::exists(path)) {
                    grid[{method, length, seed}] = load_prefix(path);
                } else {
                    AttackConfig cfg = rc.attack;
                    cfg.prefix_length = length;
                    cfg.rng_seed = seed;
                    AdversarialPrefix p = optimize_prefix(method, model, ref, cfg);
                    std::ostringstream artifact;
                    artifact << serialize_prefix(p, method_loss_spec(method));
                    write_file(path, artifact.str());
                    grid[{method, length, seed}] = std::move(p);
                }
            }
    return grid;
}

int cmd_eval(const CommonOpts& common, const std::string& report_kind,
             const std::string& seeds_csv, const std::string& variant) {
    RunConfig rc = make_run_config(common);
    if (!seeds_csv.empty()) rc.eval.seeds = parse_seeds(seeds_csv);
    const std::string ckpt_path = resolve_checkpoint(rc, variant);
    const std::string ckpt_bytes = read_file(ckpt_path);
    std::istringstream ckpt_in(ckpt_bytes);
    const PolicyModel model = PolicyModel::load(ckpt_in);

    EvalConfig ecfg = rc.eval;
    if (report_kind == "table1") {
        ecfg.prefix_lengths = {25};
    } else if (report_kind != "sweep") {
        throw ContractError("unknown report kind: " + report_kind + " (expected table1 or sweep)");
    }
    const PrefixGrid grid = load_or_optimize_grid(rc, model, ecfg);
    const EvalReport report = evaluate_grid(model, grid, ecfg);

    std::ostringstream out;
    out << provenance(rc, {{"checkpoint", ckpt_bytes}});
    if (report_kind == "table1") {
        out << "# full-scale reference avg ASR: ours 47.08 > mgcg 39.59 > gcg 35.26 > random "
               "20.79 > gd 18.96 (annotation only)\n";
        out << "# prefixes use 25 tokens for every method\n";
        out << write_asr_table(report, "method comparison, mean ASR per task");
        write_file(rc.reports_dir() + "/table1.tsv", out.str());
        std::cout << write_asr_table(report, "method comparison, mean ASR per task");
        std::cout << "wrote " << rc.reports_dir() << "/table1.tsv\n";
    } else {
        out << "# full-scale reference: ours 33.83% at 10 tokens, 68.75% at 48 (annotation "
               "only)\n";
        const auto table = length_sweep_table(report);
        for (const auto& [method, curve] : table) {
            std::ostringstream plot;
            plot << "# mean ASR vs prefix length, method " << method << "\n";
            plot << write_plot_data(curve);
            write_file(rc.reports_dir() + "/sweep_" + method + ".txt", plot.str());
            out << "method " << method << ":\n" << write_plot_data(curve);
        }
        write_file(rc.reports_dir() + "/sweep_summary.txt", out.str());
        std::cout << out.str();
    }
    write_file(rc.reports_dir() + "/" + report_kind + "_dump.txt", write_full_dump(report));
    return 0;
}

int cmd_ablate(const CommonOpts& common, const std::string& variant) {
    RunConfig rc = make_run_config(common);
    const std::string ckpt_path = resolve_checkpoint(rc, variant);
    const std::string ckpt_bytes = read_file(ckpt_path);
    std::istringstream ckpt_in(ckpt_bytes);
    const PolicyModel model = PolicyModel::load(ckpt_in);

    const EvalReport report = ablation_matrix(model, rc.eval, rc.attack);
    std::ostringstream out;
    out << provenance(rc, {{"checkpoint", ckpt_bytes}});
    out << "# full-scale reference ASR at 48 tokens: discrete 0.51, continuous 0.53, "
           "continuous+cross_attn 0.56, continuous+self_attn 0.69 (annotation only)\n";
    EvalConfig cfg_used = report.config;
    out << write_asr_table(report, "loss-term ablation, mean ASR per task");
    write_file(rc.reports_dir() + "/table2.tsv", out.str());
    write_file(rc.reports_dir() + "/table2_dump.txt", write_full_dump(report));
    (void)cfg_used;
    std::cout << write_asr_table(report, "loss-term ablation, mean ASR per task");
    std::cout << "wrote " << rc.reports_dir() << "/table2.tsv\n";
    return 0;
}

int cmd_transfer(const CommonOpts& common, const std::string& source_variant,
                 const std::string& target_variant) {
    RunConfig rc = make_run_config(common);
    const std::string src_bytes = read_file(resolve_checkpoint(rc, source_variant));
    const std::string tgt_bytes = read_file(resolve_checkpoint(rc, target_variant));
    std::istringstream src_in(src_bytes), tgt_in(tgt_bytes);
    const PolicyModel source = PolicyModel::load(src_in);
    const PolicyModel target = PolicyModel::load(tgt_in);

    const PrefixGrid grid = load_or_optimize_grid(rc, source, rc.eval);
    const EvalReport report = transfer_eval(source, target, grid, rc.eval);

    std::ostringstream out;
    out << provenance(rc, {{"source_checkpoint", src_bytes}, {"target_checkpoint", tgt_bytes}});
    out << "# full-scale reference: 52.2% gray-box ASR at 10 tokens (annotation only)\n";
    const auto table = length_sweep_table(report);
    for (const auto& [method, curve] : table) {
        std::ostringstream plot;
        plot << "# transfer ASR vs prefix length, method " << method << " (source "
             << source_variant << ", target " << target_variant << ")\n";
        plot << write_plot_data(curve);
        write_file(rc.reports_dir() + "/transfer_" + method + ".txt", plot.str());
        out << "method " << method << ":\n" << write_plot_data(curve);
    }
    write_file(rc.reports_dir() + "/transfer_summary.txt", out.str());
    write_file(rc.reports_dir() + "/transfer_dump.txt", write_full_dump(report));
    std::cout << out.str();
    return 0;
}

int cmd_gradcheck() {
    const GradcheckResult r = run_gradcheck_suite();
    std::cout << "primitive ops worst rel err " << r.worst_primitive << "\n";
    std::cout << "attention block worst rel err " << r.worst_block << "\n";
    std::cout << "full path worst rel err " << r.worst_full_path << "\n";
    if (r.worst() < 1e-4) {
        std::cout << "gradcheck passed (threshold 1e-4)\n";
        return 0;
    }
    std::cout << "gradcheck FAILED (threshold 1e-4)\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial-prefix workbench for a toy manipulation policy"};
    app.require_subcommand(1);

    CommonOpts common;

    auto* gen = app.add_subcommand("gen-data", "generate the expert demonstration dataset");
    std::string gen_tasks = "all";
    int gen_demos = 0, gen_seed = 0;
    add_common(gen, common);
    gen->add_option("--tasks", gen_tasks, "all or comma-separated task names")
        ->capture_default_str();
    gen->add_option("--demos", gen_demos, "demonstrations per task")
        ->check(CLI::Range(1, 1000000).description("demos must be a positive count"));
    gen->add_option("--seed", gen_seed, "dataset seed")->capture_default_str();

    auto* tr = app.add_subcommand("train", "behavior-clone a policy variant on the dataset");
    std::string tr_variant = "large";
    int tr_epochs = 0, tr_init_seed = 42;
    add_common(tr, common);
    tr->add_option("--variant", tr_variant, "large or small")->capture_default_str();
    tr->add_option("--epochs", tr_epochs, "override epoch count");
    tr->add_option("--init-seed", tr_init_seed, "weight initialization seed")
        ->capture_default_str();

    auto* at = app.add_subcommand("attack", "optimize an adversarial prefix");
    std::string at_method = "ours", at_variant = "large";
    int at_length = 25;
    std::uint64_t at_seed = 42;
    add_common(at, common);
    at->add_option("--method", at_method, "random, gcg, mgcg, gd, or ours")
        ->capture_default_str();
    at->add_option("--length", at_length, "prefix token count")->capture_default_str();
    at->add_option("--seed", at_seed, "optimizer seed")->capture_default_str();
    at->add_option("--variant", at_variant, "victim variant")->capture_default_str();

    auto* ev = app.add_subcommand("eval", "method-comparison grid or length sweep");
    std::string ev_report = "table1", ev_seeds, ev_variant = "large";
    add_common(ev, common);
    ev->add_option("--report", ev_report, "table1 or sweep")->capture_default_str();
    ev->add_option("--seeds", ev_seeds, "comma-separated seed list");
    ev->add_option("--variant", ev_variant, "victim variant")->capture_default_str();

    auto* ab = app.add_subcommand("ablate", "loss-term ablation matrix");
    std::string ab_variant = "large";
    add_common(ab, common);
    ab->add_option("--variant", ab_variant, "victim variant")->capture_default_str();

    auto* tf = app.add_subcommand("transfer", "gray-box transfer between variants");
    std::string tf_source = "large", tf_target = "small";
    add_common(tf, common);
    tf->add_option("--source", tf_source, "prefix-source variant")->capture_default_str();
    tf->add_option("--target", tf_target, "evaluation-target variant")->capture_default_str();

    auto* gc = app.add_subcommand("gradcheck", "run the gradient-fidelity property suite");
    (void)gc;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // usage problems exit 2; --help exits 0
    }

    try {
        if (gen->parsed()) return cmd_gen_data(common, gen_tasks, gen_demos, gen_seed);
        if (tr->parsed()) return cmd_train(common, tr_variant, tr_epochs, tr_init_seed);
        if (at->parsed()) return cmd_attack(common, at_method, at_length, at_seed, at_variant);
        if (ev->parsed()) return cmd_eval(common, ev_report, ev_seeds, ev_variant);
        if (ab->parsed()) return cmd_ablate(common, ab_variant);
        if (tf->parsed()) return cmd_transfer(common, tf_source, tf_target);
        if (gc->parsed()) return cmd_gradcheck();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
