#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "prefixbench/evalharness.hpp"

using namespace pbench;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg = small_config();
    cfg.hidden_dim = 16;
    cfg.n_heads = 2;
    cfg.n_encoder_layers = 1;
    cfg.n_controller_layers = 1;
    return cfg;
}

EvalConfig tiny_eval() {
    EvalConfig cfg;
    cfg.n_demos_per_task = 5;
    cfg.seeds = {42};
    cfg.methods = {"ours", "random"};
    cfg.prefix_lengths = {3};
    cfg.tasks = {sim::TaskType::visual_manipulation, sim::TaskType::rearrange};
    return cfg;
}

AttackConfig tiny_attack() {
    AttackConfig cfg = AttackConfig::ci_profile();
    cfg.steps = 2;
    cfg.batch_size = 4;
    cfg.top_k = 4;
    cfg.gd_epochs = 5;
    return cfg;
}

// every action lands in the workspace corner, far from any object
PolicyModel corner_policy() {
    PolicyModel model(tiny_config(), 3);
    for (int k = 0; k < 4; ++k) {
        for (double& v : model.params().at("head_" + std::to_string(k) + "_w").value) v = 0.0;
        auto& b = model.params().at("head_" + std::to_string(k) + "_b").value;
        for (double& v : b) v = 0.0;
        b[0] = 100.0;
    }
    return model;
}

}  // namespace

TEST_CASE("eval config validation") {
    EvalConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.n_demos_per_task == 50);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{42, 22, 76});
    CHECK(cfg.prefix_lengths == std::vector<int>{10, 25, 48});
    cfg.n_demos_per_task = 0;
    CHECK_THROWS_AS(cfg.validate(), ContractError);
    EvalConfig empty;
    empty.methods.clear();
    CHECK_THROWS_AS(empty.validate(), ContractError);
}

TEST_CASE("empty prefix episode equals the clean episode") {
    PolicyModel model(tiny_config(), 3);
    const auto task = sim::sample_task(sim::TaskType::visual_manipulation, 8);
    const auto clean = run_episode(model, task);
    const auto attacked = run_attacked_episode(model, {}, task);
    CHECK(attacked.success == clean.success);
    CHECK(attacked.steps_used == clean.steps_used);
    CHECK(attacked.trace == clean.trace);

    const auto again = run_attacked_episode(model, {5, 6, 7}, task);
    const auto again2 = run_attacked_episode(model, {5, 6, 7}, task);
    CHECK(again.success == again2.success);
    CHECK(again.trace == again2.trace);
}

TEST_CASE("empty-prefix ASR is exactly the complement of clean success") {
    PolicyModel model(tiny_config(), 3);
    for (sim::TaskType task : sim::all_tasks()) {
        const double a = asr(model, {}, task, 20, 9000);
        const double clean = clean_success_rate(model, task, 20, 9000);
        CHECK(a == 1.0 - clean);
    }
}

TEST_CASE("a policy that always misses has ASR one") {
    PolicyModel model = corner_policy();
    // bin 0 center is ~0.024; objects are sampled at >= 0.119, beyond pick radius
    CHECK(asr(model, {}, sim::TaskType::visual_manipulation, 10, 9000) == 1.0);
    CHECK(asr(model, {4, 5}, sim::TaskType::visual_manipulation, 10, 9000) == 1.0);
}

TEST_CASE("method dispatch covers all five methods") {
    CHECK(method_loss_spec("ours").terms_string() == "continuous,self_attn");
    CHECK(method_loss_spec("gcg").terms_string() == "discrete");
    CHECK(method_loss_spec("mgcg").terms_string() == "discrete");
    CHECK(method_loss_spec("gd").terms_string() == "discrete");
    CHECK(method_loss_spec("random").terms_string() == "discrete");
    CHECK_THROWS_AS(method_loss_spec("nonsense"), ContractError);

    PolicyModel model(tiny_config(), 3);
    const auto demo = attack_source_demo();
    const auto ref = build_clean_reference(model, demo);
    AttackConfig cfg = tiny_attack();
    cfg.prefix_length = 4;
    cfg.rng_seed = 42;
    for (const std::string& m : {"ours", "gcg", "mgcg", "gd", "random"}) {
        const auto p = optimize_prefix(m, model, ref, cfg);
        CHECK(p.method == m);
        CHECK(p.token_ids.size() == 4);
        CHECK(p.source_demo_id == demo.demo_id);
        for (int id : p.token_ids) CHECK(id >= 4);
    }
    CHECK_THROWS_AS(optimize_prefix("nonsense", model, ref, cfg), ContractError);
}

TEST_CASE("grid evaluation: cell counts, aggregates, determinism") {
    PolicyModel model(tiny_config(), 3);
    const auto ref = build_clean_reference(model, attack_source_demo());
    const EvalConfig ecfg = tiny_eval();
    const PrefixGrid grid = optimize_grid(model, ref, ecfg, tiny_attack());
    REQUIRE(grid.size() == 2);  // methods x lengths x seeds

    const EvalReport report = evaluate_grid(model, grid, ecfg);
    CHECK(report.cells.size() == 2 * 2);  // x tasks

    for (const EvalCell& c : report.cells) {
        CHECK(c.asr >= 0.0);
        CHECK(c.asr <= 1.0);
        CHECK(c.attacked_rate == 1.0 - c.asr);
        CHECK(c.episode_failures.size() == static_cast<std::size_t>(ecfg.n_demos_per_task));
        double sum = 0;
        for (int f : c.episode_failures) sum += f;
        CHECK(c.asr == sum / ecfg.n_demos_per_task);  // aggregate recomputes from episodes
    }

    // overall mean equals the unweighted average of per-task means
    for (const std::string& m : ecfg.methods) {
        double s = 0;
        for (sim::TaskType task : ecfg.tasks) s += report.task_method_mean(task, m);
        CHECK(report.method_mean(m) == Catch::Approx(s / ecfg.tasks.size()).epsilon(1e-12));
    }

    const EvalReport again = evaluate_grid(model, grid, ecfg);
    CHECK(write_full_dump(again) == write_full_dump(report));
}

TEST_CASE("length sweep table aggregates per method and length") {
    PolicyModel model(tiny_config(), 3);
    const auto ref = build_clean_reference(model, attack_source_demo());
    EvalConfig ecfg = tiny_eval();
    ecfg.methods = {"random"};
    ecfg.prefix_lengths = {2, 5};
    const EvalReport report =
        evaluate_grid(model, optimize_grid(model, ref, ecfg, tiny_attack()), ecfg);
    const auto table = length_sweep_table(report);
    REQUIRE(table.count("random") == 1);
    REQUIRE(table.at("random").size() == 2);
    for (const auto& [len, v] : table.at("random")) {
        CHECK((len == 2 || len == 5));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("ablation matrix runs the four feature sets through one optimizer") {
    PolicyModel model(tiny_config(), 3);
    EvalConfig ecfg = tiny_eval();
    ecfg.tasks = {sim::TaskType::visual_manipulation};
    const EvalReport report = ablation_matrix(model, ecfg, tiny_attack());
    std::set<std::string> methods;
    for (const EvalCell& c : report.cells) methods.insert(c.method);
    CHECK(methods == std::set<std::string>{"discrete", "continuous", "continuous+cross_attn",
                                           "continuous+self_attn"});
    CHECK(report.cells.size() == 4);
}

TEST_CASE("transfer reuses source prefixes byte for byte") {
    PolicyModel source(tiny_config(), 3);
    PolicyModel target(small_config(), 4);
    const auto ref = build_clean_reference(source, attack_source_demo());
    EvalConfig ecfg = tiny_eval();
    ecfg.methods = {"random"};
    const PrefixGrid grid = optimize_grid(source, ref, ecfg, tiny_attack());
    const EvalReport report = transfer_eval(source, target, grid, ecfg);
    CHECK(report.cells.size() == 2);

    // a model with a different vocabulary cannot consume these prefixes
    ModelConfig other = tiny_config();
    other.vocab_size = 12;
    PolicyModel mismatched(other, 5);
    CHECK_THROWS_AS(transfer_eval(source, mismatched, grid, ecfg), ContractError);
}

TEST_CASE("report writers emit parseable deterministic text") {
    PolicyModel model(tiny_config(), 3);
    const auto ref = build_clean_reference(model, attack_source_demo());
    const EvalConfig ecfg = tiny_eval();
    const EvalReport report =
        evaluate_grid(model, optimize_grid(model, ref, ecfg, tiny_attack()), ecfg);

    const std::string table = write_asr_table(report, "method comparison");
    CHECK(table.find("method comparison") != std::string::npos);
    CHECK(table.find("task\tours\trandom") != std::string::npos);
    CHECK(table.find("visual_manipulation") != std::string::npos);
    CHECK(table.find("avg") != std::string::npos);

    const std::string dump = write_full_dump(report);
    // one line per cell plus the header
    std::size_t lines = 0;
    for (char ch : dump) lines += ch == '\n';
    CHECK(lines == report.cells.size() + 1);

    const std::string plot = write_plot_data({{10, 0.25}, {48, 0.5}});
    CHECK(plot == "10 0.25\n48 0.5\n");
}
