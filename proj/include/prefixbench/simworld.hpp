#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "prefixbench/errors.hpp"
#include "prefixbench/rng.hpp"

namespace pbench::sim {

// Deterministic toy tabletop world: unit-square workspace, symbolic object
// lists, a single pick-and-place primitive, a scripted expert and a judge.

inline constexpr double kPickRadius = 0.1;
inline constexpr double kDisplacementTolerance = 0.02;
inline constexpr double kSuccessTolerance = 0.08;
inline constexpr double kMinSeparation = 0.08;
inline constexpr int kBudgetSlack = 2;  // step budget = oracle_steps + slack

// Object poses are sampled on the same 21-cell grid the policy's action
// decoder discretizes to, so a well-trained policy can hit targets exactly.
inline constexpr int kPoseGrid = 21;

inline constexpr int kNumShapes = 5;
inline constexpr int kNumColors = 5;

inline const char* const kShapeNames[kNumShapes] = {"square", "circle", "triangle", "star", "hexagon"};
inline const char* const kColorNames[kNumColors] = {"red", "yellow", "blue", "green", "purple"};

enum class TaskType { visual_manipulation, rearrange, same_shape, follow_order };

inline const char* task_name(TaskType t) {
    switch (t) {
        case TaskType::visual_manipulation: return "visual_manipulation";
        case TaskType::rearrange: return "rearrange";
        case TaskType::same_shape: return "same_shape";
        case TaskType::follow_order: return "follow_order";
    }
    return "?";
}

inline TaskType task_from_name(const std::string& s) {
    for (TaskType t : {TaskType::visual_manipulation, TaskType::rearrange, TaskType::same_shape,
                       TaskType::follow_order})
        if (s == task_name(t)) return t;
    throw ContractError("unknown task type: " + s);
}

inline const std::vector<TaskType>& all_tasks() {
    static const std::vector<TaskType> v = {TaskType::visual_manipulation, TaskType::rearrange,
                                            TaskType::same_shape, TaskType::follow_order};
    return v;
}

struct ObjectSpec {
    int object_id = 0;
    int shape_id = 0;
    int color_id = 0;
    double x = 0.0, y = 0.0;
    bool is_container = false;
};

struct Scene {
    std::vector<ObjectSpec> objects;
    int step_count = 0;

    const ObjectSpec* find(int object_id) const {
        for (const ObjectSpec& o : objects)
            if (o.object_id == object_id) return &o;
        return nullptr;
    }
    ObjectSpec* find(int object_id) {
        for (ObjectSpec& o : objects)
            if (o.object_id == object_id) return &o;
        return nullptr;
    }
};

struct ContinuousAction {
    double pick_x = 0.0, pick_y = 0.0;
    double place_x = 0.0, place_y = 0.0;
};

// One goal entry: move object_id either into container_id (>= 0) or to the
// fixed point (tx, ty).
struct GoalItem {
    int object_id = 0;
    int container_id = -1;
    double tx = 0.0, ty = 0.0;
};

// Instruction element: a plain word or an inlined object reference. Object
// references carry the attributes shown to the model (for rearrange the pose
// is the target pose, not the current one).
struct Word {
    std::string text;
};
struct ObjRef {
    int shape_id = 0;
    int color_id = 0;
    double x = 0.0, y = 0.0;
};
using InstrElem = std::variant<Word, ObjRef>;

struct TaskInstance {
    TaskType task_type = TaskType::visual_manipulation;
    std::uint64_t seed = 0;
    Scene scene;
    std::vector<InstrElem> instruction;
    std::vector<GoalItem> goal;
    bool ordered = false;
    int oracle_steps = 1;

    int step_budget() const { return oracle_steps + kBudgetSlack; }
};

struct EpisodeOutcome {
    bool success = false;
    int steps_used = 0;
    bool unintended_interaction = false;
    std::vector<std::string> trace;
};

inline double dist(double ax, double ay, double bx, double by) {
    return std::hypot(ax - bx, ay - by);
}

inline double grid_center(int cell) { return (cell + 0.5) / kPoseGrid; }

// ---- action application -----------------------------------------------------

// If an object center lies within kPickRadius of the pick point, the nearest
// such object moves to the place point. Ties go to the lower object id.
inline std::pair<Scene, std::string> apply_action(const Scene& scene, const ContinuousAction& a) {
    if (a.pick_x < 0 || a.pick_x > 1 || a.pick_y < 0 || a.pick_y > 1 || a.place_x < 0 ||
        a.place_x > 1 || a.place_y < 0 || a.place_y > 1)
        throw ContractError("apply_action: coordinates outside [0,1]");
    Scene out = scene;
    out.step_count += 1;
    int best = -1;
    double best_d = kPickRadius;
    for (const ObjectSpec& o : out.objects) {
        const double d = dist(o.x, o.y, a.pick_x, a.pick_y);
        if (d < best_d || (d == best_d && best >= 0 && o.object_id < best)) {
            best_d = d;
            best = o.object_id;
        }
    }
    std::ostringstream note;
    if (best >= 0) {
        ObjectSpec* o = out.find(best);
        o->x = a.place_x;
        o->y = a.place_y;
        note << "moved object " << best << " to (" << a.place_x << "," << a.place_y << ")";
    } else {
        note << "miss";
    }
    return {out, note.str()};
}

// ---- goal predicate and judge -------------------------------------------------

inline bool goal_item_satisfied(const GoalItem& g, const Scene& s) {
    const ObjectSpec* obj = s.find(g.object_id);
    if (!obj) return false;
    double tx = g.tx, ty = g.ty;
    if (g.container_id >= 0) {
        const ObjectSpec* c = s.find(g.container_id);
        if (!c) return false;
        tx = c->x;
        ty = c->y;
    }
    return dist(obj->x, obj->y, tx, ty) <= kSuccessTolerance;
}

inline bool goal_holds(const TaskInstance& task, const std::vector<Scene>& history, std::size_t t) {
    for (const GoalItem& g : task.goal)
        if (!goal_item_satisfied(g, history[t])) return false;
    if (task.ordered) {
        // first-satisfaction times must be non-decreasing in goal order
        std::size_t prev = 0;
        for (const GoalItem& g : task.goal) {
            std::size_t first = t;
            for (std::size_t u = 1; u <= t; ++u)
                if (goal_item_satisfied(g, history[u])) {
                    first = u;
                    break;
                }
            if (first < prev) return false;
            prev = first;
        }
    }
    return true;
}

// Objects the goal may legitimately move or use as targets.
inline bool is_goal_object(const TaskInstance& task, int object_id) {
    for (const GoalItem& g : task.goal)
        if (g.object_id == object_id || g.container_id == object_id) return true;
    return false;
}

// history[0] is the initial scene; history[t] is the scene after t actions.
inline EpisodeOutcome judge(const TaskInstance& task, const std::vector<Scene>& history) {
    if (history.empty()) throw ContractError("judge: empty scene history");
    EpisodeOutcome out;
    const Scene& initial = history[0];
    const std::size_t budget = static_cast<std::size_t>(task.step_budget());
    const std::size_t last = std::min(history.size() - 1, budget);

    auto displaced_at = [&](std::size_t t) {
        for (const ObjectSpec& o : initial.objects) {
            if (is_goal_object(task, o.object_id)) continue;
            const ObjectSpec* now = history[t].find(o.object_id);
            if (now && dist(o.x, o.y, now->x, now->y) > kDisplacementTolerance) return true;
        }
        return false;
    };

    for (std::size_t t = 1; t <= last; ++t) {
        if (goal_holds(task, history, t) && !displaced_at(t)) {
            out.success = true;
            out.steps_used = static_cast<int>(t);
            // flag only steps up to the success step: later knocks cannot
            // revoke an already-recorded success
            for (std::size_t u = 1; u <= t && !out.unintended_interaction; ++u)
                out.unintended_interaction = displaced_at(u);
            return out;
        }
    }
    out.success = false;
    out.steps_used = static_cast<int>(last);
    for (std::size_t u = 1; u <= last && !out.unintended_interaction; ++u)
        out.unintended_interaction = displaced_at(u);
    return out;
}

// ---- scripted expert ----------------------------------------------------------

// Greedy expert: address the first unsatisfied goal item (goal order), pick
// the object's current center, place at its target.
inline ContinuousAction oracle_action(const TaskInstance& task, const Scene& scene) {
    for (const GoalItem& g : task.goal) {
        if (goal_item_satisfied(g, scene)) continue;
        const ObjectSpec* obj = scene.find(g.object_id);
        if (!obj) throw GenerationError("oracle: goal object missing from scene");
        double tx = g.tx, ty = g.ty;
        if (g.container_id >= 0) {
            const ObjectSpec* c = scene.find(g.container_id);
            if (!c) throw GenerationError("oracle: goal container missing from scene");
            tx = c->x;
            ty = c->y;
        }
        return {obj->x, obj->y, tx, ty};
    }
    throw GenerationError("oracle: nothing to do (task already solved)");
}

// ---- task sampling --------------------------------------------------------------

namespace detail {

struct GridSampler {
    Rng& rng;
    std::vector<std::pair<double, double>> taken;

    // sample a grid-center point at least kMinSeparation from taken points
    // and at least min_dist_from from the given anchors
    std::pair<double, double> sample(const std::vector<std::pair<double, double>>& anchors = {},
                                     double anchor_dist = 0.0) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const int gx = rng.next_int(2, kPoseGrid - 2);
            const int gy = rng.next_int(2, kPoseGrid - 2);
            const double x = grid_center(gx), y = grid_center(gy);
            bool ok = true;
            for (auto [tx, ty] : taken)
                if (dist(x, y, tx, ty) < kMinSeparation) ok = false;
            for (auto [ax, ay] : anchors)
                if (dist(x, y, ax, ay) < anchor_dist) ok = false;
            if (ok) {
                taken.push_back({x, y});
                return {x, y};
            }
        }
        throw GenerationError("task sampling: no valid layout after 1000 rejections");
    }
};

inline ObjRef ref_of(const ObjectSpec& o) { return {o.shape_id, o.color_id, o.x, o.y}; }
inline ObjRef ref_at(const ObjectSpec& o, double x, double y) {
    return {o.shape_id, o.color_id, x, y};
}

}  // namespace detail

inline TaskInstance sample_task(TaskType type, std::uint64_t seed) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Rng rng(derive_seed(seed, "task_sample", static_cast<std::uint64_t>(attempt)));
        TaskInstance task;
        task.task_type = type;
        task.seed = seed;
        detail::GridSampler pos{rng, {}};
        int next_id = 0;
        auto add_object = [&](bool container, std::pair<double, double> p) {
            ObjectSpec o;
            o.object_id = next_id++;
            o.shape_id = rng.next_int(0, kNumShapes);
            o.color_id = rng.next_int(0, kNumColors);
            o.x = p.first;
            o.y = p.second;
            o.is_container = container;
            task.scene.objects.push_back(o);
            return o.object_id;
        };
        auto obj = [&](int id) -> const ObjectSpec& { return *task.scene.find(id); };
        auto W = [](const char* w) { return InstrElem{Word{w}}; };
        auto O = [&](int id) { return InstrElem{detail::ref_of(obj(id))}; };

        switch (type) {
            case TaskType::visual_manipulation: {
                const int target = add_object(false, pos.sample());
                const int container =
                    add_object(true, pos.sample({{obj(target).x, obj(target).y}}, 0.25));
                const int n_distract = rng.next_int(1, 3);
                for (int i = 0; i < n_distract; ++i) add_object(false, pos.sample());
                task.goal = {{target, container, 0, 0}};
                task.oracle_steps = 1;
                task.instruction = {W("put"), O(target), W("into"), O(container)};
                break;
            }
            case TaskType::rearrange: {
                const int a = add_object(false, pos.sample());
                const int b = add_object(false, pos.sample());
                const auto ta = pos.sample({{obj(a).x, obj(a).y}}, 0.25);
                const auto tb = pos.sample({{obj(b).x, obj(b).y}}, 0.25);
                if (rng.next_double() < 0.5) add_object(false, pos.sample());
                task.goal = {{a, -1, ta.first, ta.second}, {b, -1, tb.first, tb.second}};
                task.oracle_steps = 2;
                task.instruction = {W("move"), O(a),
                                    W("to"),   InstrElem{detail::ref_at(obj(a), ta.first, ta.second)},
                                    W("and"),  O(b),
                                    W("to"),   InstrElem{detail::ref_at(obj(b), tb.first, tb.second)}};
                break;
            }
            case TaskType::same_shape: {
                const int o0 = add_object(false, pos.sample());
                const int o1 = add_object(false, pos.sample());
                const int o2 = add_object(false, pos.sample());
                const int container = add_object(
                    true, pos.sample({{obj(o0).x, obj(o0).y}, {obj(o1).x, obj(o1).y},
                                      {obj(o2).x, obj(o2).y}},
                                     0.25));
                // exemplar is the first object; every same-shaped object goes in
                for (int id : {o0, o1, o2})
                    if (obj(id).shape_id == obj(o0).shape_id)
                        task.goal.push_back({id, container, 0, 0});
                task.oracle_steps = static_cast<int>(task.goal.size());
                task.instruction = {W("put"),  W("same"), W("shape"), W("as"),   O(o0),
                                    W("from"), O(o0),     O(o1),      O(o2),
                                    W("into"), O(container)};
                break;
            }
            case TaskType::follow_order: {
                const int a = add_object(false, pos.sample());
                const int b = add_object(false, pos.sample());
                const int c1 =
                    add_object(true, pos.sample({{obj(a).x, obj(a).y}, {obj(b).x, obj(b).y}}, 0.25));
                const int c2 =
                    add_object(true, pos.sample({{obj(a).x, obj(a).y}, {obj(b).x, obj(b).y}}, 0.25));
                task.goal = {{a, c1, 0, 0}, {b, c2, 0, 0}};
                task.ordered = true;
                task.oracle_steps = 2;
                task.instruction = {W("put"), O(a), W("into"), O(c1), W("then"),
                                    W("put"), O(b), W("into"), O(c2)};
                break;
            }
        }

        // keep only instances the expert provably solves
        std::vector<Scene> history = {task.scene};
        bool ok = true;
        try {
            for (int s = 0; s < task.oracle_steps; ++s) {
                const ContinuousAction a = oracle_action(task, history.back());
                history.push_back(apply_action(history.back(), a).first);
            }
        } catch (const GenerationError&) {
            ok = false;
        }
        if (ok) {
            const EpisodeOutcome check = judge(task, history);
            if (check.success && !check.unintended_interaction) return task;
        }
    }
    throw GenerationError("sample_task: no solvable instance after 1000 rejections");
}

// ---- line-oriented serialization ------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// One task per line, space-separated, fields in documented order:
//   task <type> seed <u64> objects <n> {id shape color x y container}...
//   goal <n> ordered <0|1> {obj cont tx ty}... oracle_steps <k>
//   instr <n> {w <word> | o <shape> <color> <x> <y>}...
inline std::string serialize_task(const TaskInstance& t) {
    std::ostringstream s;
    s << "task " << task_name(t.task_type) << " seed " << t.seed << " objects "
      << t.scene.objects.size();
    for (const ObjectSpec& o : t.scene.objects)
        s << " " << o.object_id << " " << o.shape_id << " " << o.color_id << " "
          << detail::fmt_double(o.x) << " " << detail::fmt_double(o.y) << " "
          << (o.is_container ? 1 : 0);
    s << " goal " << t.goal.size() << " ordered " << (t.ordered ? 1 : 0);
    for (const GoalItem& g : t.goal)
        s << " " << g.object_id << " " << g.container_id << " " << detail::fmt_double(g.tx) << " "
          << detail::fmt_double(g.ty);
    s << " oracle_steps " << t.oracle_steps;
    s << " instr " << t.instruction.size();
    for (const InstrElem& e : t.instruction) {
        if (const Word* w = std::get_if<Word>(&e))
            s << " w " << w->text;
        else {
            const ObjRef& r = std::get<ObjRef>(e);
            s << " o " << r.shape_id << " " << r.color_id << " " << detail::fmt_double(r.x) << " "
              << detail::fmt_double(r.y);
        }
    }
    return s.str();
}

inline TaskInstance parse_task(const std::string& line) {
    std::istringstream s(line);
    auto expect = [&](const char* kw) {
        std::string tok;
        s >> tok;
        if (tok != kw) throw ArtifactError(std::string("task record: expected '") + kw + "', got '" + tok + "'");
    };
    TaskInstance t;
    expect("task");
    std::string type;
    s >> type;
    t.task_type = task_from_name(type);
    expect("seed");
    s >> t.seed;
    expect("objects");
    std::size_t n;
    s >> n;
    for (std::size_t i = 0; i < n; ++i) {
        ObjectSpec o;
        int cont;
        s >> o.object_id >> o.shape_id >> o.color_id >> o.x >> o.y >> cont;
        o.is_container = cont != 0;
        t.scene.objects.push_back(o);
    }
    expect("goal");
    s >> n;
    int ordered;
    expect("ordered");
    s >> ordered;
    t.ordered = ordered != 0;
    for (std::size_t i = 0; i < n; ++i) {
        GoalItem g;
        s >> g.object_id >> g.container_id >> g.tx >> g.ty;
        t.goal.push_back(g);
    }
    expect("oracle_steps");
    s >> t.oracle_steps;
    expect("instr");
    s >> n;
    for (std::size_t i = 0; i < n; ++i) {
        std::string kind;
        s >> kind;
        if (kind == "w") {
            Word w;
            s >> w.text;
            t.instruction.push_back(w);
        } else if (kind == "o") {
            ObjRef r;
            s >> r.shape_id >> r.color_id >> r.x >> r.y;
            t.instruction.push_back(r);
        } else {
            throw ArtifactError("task record: bad instruction element kind '" + kind + "'");
        }
    }
    if (!s) throw ArtifactError("task record: truncated line");
    return t;
}

}  // namespace pbench::sim
