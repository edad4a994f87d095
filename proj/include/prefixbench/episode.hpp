#pragma once

#include <vector>

#include "prefixbench/policy.hpp"
#include "prefixbench/prompt.hpp"
#include "prefixbench/simworld.hpp"

namespace pbench {

// Greedy closed-loop rollout of the policy on a task, with an optional
// adversarial prefix prepended to the instruction prompt. Runs to the step
// budget and hands the scene history to the judge.
inline sim::EpisodeOutcome run_episode(const PolicyModel& model, const sim::TaskInstance& task,
                                       const std::vector<int>& prefix_ids = {},
                                       const Vocab& vocab = Vocab::standard()) {
    PromptSequence prompt = tokenize(vocab, task.instruction);
    if (!prefix_ids.empty()) prompt = with_prefix(vocab, prefix_ids, prompt);

    std::vector<sim::Scene> scenes = {task.scene};
    History history;
    sim::EpisodeOutcome out;
    for (int step = 0; step < task.step_budget(); ++step) {
        const sim::Scene& current = scenes.back();
        const PolicyModel::Prediction pred = model.predict_action(prompt, history);
        auto [next, note] = sim::apply_action(current, pred.action);
        out.trace.push_back("step " + std::to_string(step) + ": " + note);
        history.push_back(HistoryStep{current.objects, pred.bins});
        scenes.push_back(next);
    }
    const sim::EpisodeOutcome verdict = sim::judge(task, scenes);
    out.success = verdict.success;
    out.steps_used = verdict.steps_used;
    out.unintended_interaction = verdict.unintended_interaction;
    return out;
}

// Expert rollout; useful as a prompt-independent reference policy.
inline std::vector<sim::Scene> oracle_rollout(const sim::TaskInstance& task) {
    std::vector<sim::Scene> scenes = {task.scene};
    for (int s = 0; s < task.oracle_steps; ++s) {
        const sim::ContinuousAction a = sim::oracle_action(task, scenes.back());
        scenes.push_back(sim::apply_action(scenes.back(), a).first);
    }
    return scenes;
}

}  // namespace pbench
