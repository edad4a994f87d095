#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefixbench/errors.hpp"
#include "prefixbench/prompt.hpp"
#include "prefixbench/rng.hpp"
#include "prefixbench/simworld.hpp"
#include "prefixbench/tensor.hpp"

namespace pbench {

// The victim policy: multimodal prompt encoder E, controller decoder D_c
// (alternating cross-attention and self-attention over the history stream)
// and a discretizing action decoder D_a of four bin-classification heads.

struct ModelConfig {
    int hidden_dim = 64;
    int n_heads = 4;
    int n_encoder_layers = 2;
    int n_controller_layers = 2;
    int n_bins = 21;
    int vocab_size = 0;
    int max_prompt_len = 64;
    int max_history_len = 16;
    int ff_mult = 4;
    // multiplies attention logits beyond the usual 1/sqrt(d_head). Sharper
    // attention widens the gap between trained keys and arbitrary tokens, so
    // out-of-distribution prefix rows do not soak up softmax mass in
    // proportion to their count.
    double attn_sharpness = 1.0;

    void validate() const {
        if (hidden_dim % n_heads != 0)
            throw ContractError("hidden_dim must be divisible by n_heads");
        if (n_bins < 2) throw ContractError("n_bins must be >= 2");
        if (!(attn_sharpness > 0.0)) throw ContractError("attn_sharpness must be positive");
    }

    bool operator==(const ModelConfig&) const = default;
};

inline ModelConfig large_config(const Vocab& vocab = Vocab::standard()) {
    ModelConfig c;
    c.hidden_dim = 64;
    c.n_heads = 4;
    c.n_encoder_layers = 2;
    c.n_controller_layers = 2;
    c.vocab_size = vocab.size();
    return c;
}

inline ModelConfig small_config(const Vocab& vocab = Vocab::standard()) {
    ModelConfig c;
    c.hidden_dim = 32;
    c.n_heads = 2;
    c.n_encoder_layers = 1;
    c.n_controller_layers = 1;
    c.vocab_size = vocab.size();
    return c;
}

// ---- action discretization ------------------------------------------------------

inline int discretize(double v, int n_bins) {
    if (v < 0.0 || v > 1.0)
        throw ContractError("discretize: coordinate " + std::to_string(v) + " outside [0,1]");
    return static_cast<int>(std::floor(std::min(v, 1.0 - 1e-9) * n_bins));
}

inline double undiscretize(int bin, int n_bins) { return (bin + 0.5) / n_bins; }

inline std::array<int, 4> discretize_action(const sim::ContinuousAction& a, int n_bins) {
    return {discretize(a.pick_x, n_bins), discretize(a.pick_y, n_bins),
            discretize(a.place_x, n_bins), discretize(a.place_y, n_bins)};
}

inline sim::ContinuousAction undiscretize_action(const std::array<int, 4>& bins, int n_bins) {
    return {undiscretize(bins[0], n_bins), undiscretize(bins[1], n_bins),
            undiscretize(bins[2], n_bins), undiscretize(bins[3], n_bins)};
}

// ---- object featurization ---------------------------------------------------------

// shape one-hot + color one-hot + raw pose + triangular bin activations of
// each pose coordinate. The triangle kernels turn position into a soft
// one-hot over the n_bins action grid, so the downstream bin heads can be
// near-linear readouts instead of having to learn binning from scratch.
inline constexpr int kPoseBins = sim::kPoseGrid;
inline constexpr int kObjFeatDim = sim::kNumShapes + sim::kNumColors + 2 + 2 * kPoseBins;

inline std::vector<double> object_features(int shape_id, int color_id, double x, double y) {
    std::vector<double> f(kObjFeatDim, 0.0);
    f[shape_id] = 1.0;
    f[sim::kNumShapes + color_id] = 1.0;
    int k = sim::kNumShapes + sim::kNumColors;
    f[k++] = x;
    f[k++] = y;
    for (int i = 0; i < kPoseBins; ++i)
        f[k++] = std::max(0.0, 1.0 - std::abs(x * kPoseBins - (i + 0.5)));
    for (int i = 0; i < kPoseBins; ++i)
        f[k++] = std::max(0.0, 1.0 - std::abs(y * kPoseBins - (i + 0.5)));
    return f;
}

inline std::vector<double> object_features(const sim::ObjectSpec& o) {
    return object_features(o.shape_id, o.color_id, o.x, o.y);
}
inline std::vector<double> object_features(const ObjectToken& o) {
    return object_features(o.shape_id, o.color_id, o.x, o.y);
}

// ---- history ------------------------------------------------------------------------

// One completed step: the scene observed before acting, and the binned action
// taken. The controller stream is [start, (o_0, a_0), ..., (o_{t-1}, a_{t-1})].
struct HistoryStep {
    std::vector<sim::ObjectSpec> observation;
    std::array<int, 4> action_bins = {0, 0, 0, 0};
};
using History = std::vector<HistoryStep>;

// ---- feature taps ---------------------------------------------------------------------

struct FeatureTaps {
    Tensor controller_output;          // [1, hidden]
    std::vector<Tensor> self_attn;     // per controller layer, at the action position
    std::vector<Tensor> cross_attn;    // per controller layer, at the action position
    std::vector<Tensor> encoder_self;  // optional: encoder self-attn taps at the terminator
};

struct ForwardOptions {
    bool weight_grads = false;    // track gradients into model parameters
    Tensor prefix_onehot;         // [L, vocab] one-hot rows prepended to the prompt
    Tensor prefix_embeds;         // [L, hidden] raw embeddings prepended (GD relaxation)
    bool encoder_taps = false;    // also record encoder self-attention taps
    // diagnostic switches: hide this many leading (prefix) rows from the
    // encoder self-attention keys / the controller cross-attention memory
    int mask_lead_in_encoder = 0;
    int mask_lead_in_cross = 0;
};

struct ForwardResult {
    Tensor memory;  // [prompt_len(+prefix), hidden]
    FeatureTaps taps;
    std::array<Tensor, 4> head_logits;  // each [1, n_bins]
};

// ---- the model --------------------------------------------------------------------------

struct Param {
    std::vector<int> shape;
    std::vector<double> value;
    std::size_t size() const { return value.size(); }
};

class PolicyModel {
public:
    PolicyModel() = default;
    PolicyModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
        cfg_.validate();
        build_param_table();
        Rng rng(derive_seed(init_seed, "policy_init"));
        for (auto& [name, p] : params_) init_param(name, p, rng);
        build_pos_table();
    }

    const ModelConfig& config() const { return cfg_; }
    std::map<std::string, Param>& params() { return params_; }
    const std::map<std::string, Param>& params() const { return params_; }

    // ---- forward pass ----------------------------------------------------

    ForwardResult forward(Tape& t, const PromptSequence& prompt, const History& history,
                          const ForwardOptions& opt = {}) const {
        const int d = cfg_.hidden_dim;

        // -- prompt embedding ------------------------------------------------
        // Prompts are left-padded to the full max_prompt_len so the encoder
        // always sees a fixed-length sequence. Every training sample is then
        // dominated by pad rows at the leading positions, and attention learns
        // to give such rows no mass; a prepended token string replaces pads
        // one-for-one instead of adding rows, so its attention footprint does
        // not grow with its length.
        std::vector<Tensor> segs;
        int prefix_len = 0;
        {
            int content_rows = static_cast<int>(prompt.size());
            if (opt.prefix_onehot.valid()) content_rows += opt.prefix_onehot.rows();
            if (opt.prefix_embeds.valid()) content_rows += opt.prefix_embeds.rows();
            if (content_rows < cfg_.max_prompt_len) {
                const std::vector<int> pads(cfg_.max_prompt_len - content_rows, 0);
                segs.push_back(t.gather_rows(weight(t, "tok_embed", opt), pads));
            }
        }
        if (opt.prefix_onehot.valid()) {
            if (opt.prefix_onehot.cols() != cfg_.vocab_size)
                throw ShapeError("prefix one-hot width != vocab size");
            prefix_len = opt.prefix_onehot.rows();
            segs.push_back(t.matmul(opt.prefix_onehot, weight(t, "tok_embed", opt)));
        } else if (opt.prefix_embeds.valid()) {
            if (opt.prefix_embeds.cols() != d)
                throw ShapeError("prefix embeddings width != hidden dim");
            prefix_len = opt.prefix_embeds.rows();
            segs.push_back(opt.prefix_embeds);
        }
        append_prompt_segments(t, prompt, opt, segs);
        if (pads_right > 0) {
            const std::vector<int> pads(pads_right, 0);
            segs.push_back(t.gather_rows(weight(t, "tok_embed", opt), pads));
        }
        Tensor x = segs.size() == 1 ? segs[0] : t.concat_rows(segs);
        const int n = x.rows();
        if (n > cfg_.max_prompt_len)
            throw ContractError("prompt length " + std::to_string(n) + " exceeds max " +
                                std::to_string(cfg_.max_prompt_len));
        (void)prefix_len;

        // right-aligned positions: prompts of different lengths line up at the
        // terminator, so a prepended prefix does not shift instruction tokens.
        // Positions left of the instruction window share one encoding; prefix
        // tokens carry no position identity of their own.
        x = t.add(x, t.constant({n, d}, pos_slice(cfg_.max_prompt_len - n, n)));

        std::vector<Tensor> encoder_taps;
        for (int l = 0; l < cfg_.n_encoder_layers; ++l) {
            const std::string p = "enc." + std::to_string(l) + ".";
            Tensor attn = mha(t, x, x, p + "attn", opt,
                              std::min(opt.mask_lead_in_encoder, prefix_len));
            x = t.layer_norm_rows(t.add(x, attn), weight(t, p + "ln1_g", opt),
                                  weight(t, p + "ln1_b", opt));
            if (opt.encoder_taps) encoder_taps.push_back(t.slice_rows(x, n - 1, 1));
            Tensor ff = feedforward(t, x, p, opt);
            x = t.layer_norm_rows(t.add(x, ff), weight(t, p + "ln2_g", opt),
                                  weight(t, p + "ln2_b", opt));
        }
        Tensor memory = x;

        // -- history stream ----------------------------------------------------
        std::vector<Tensor> hsegs;
        hsegs.push_back(weight(t, "start_token", opt));
        for (const HistoryStep& step : history) {
            hsegs.push_back(obs_token(t, step.observation, opt));
            hsegs.push_back(action_token(t, step.action_bins, opt));
        }
        Tensor h = t.concat_rows(hsegs);
        const int hn = h.rows();
        if (hn > cfg_.max_history_len)
            throw ContractError("history length " + std::to_string(hn) + " exceeds max " +
                                std::to_string(cfg_.max_history_len));
        h = t.add(h, t.constant({hn, d}, pos_slice(0, hn)));

        FeatureTaps taps;
        taps.encoder_self = std::move(encoder_taps);
        for (int l = 0; l < cfg_.n_controller_layers; ++l) {
            const std::string p = "ctl." + std::to_string(l) + ".";
            Tensor cross = mha(t, h, memory, p + "cross", opt,
                               std::min(opt.mask_lead_in_cross, prefix_len));
            h = t.layer_norm_rows(t.add(h, cross), weight(t, p + "lnc_g", opt),
                                  weight(t, p + "lnc_b", opt));
            taps.cross_attn.push_back(t.slice_rows(h, hn - 1, 1));
            Tensor self = mha(t, h, h, p + "self", opt);
            h = t.layer_norm_rows(t.add(h, self), weight(t, p + "lns_g", opt),
                                  weight(t, p + "lns_b", opt));
            taps.self_attn.push_back(t.slice_rows(h, hn - 1, 1));
            Tensor ff = feedforward(t, h, p, opt);
            h = t.layer_norm_rows(t.add(h, ff), weight(t, p + "lnf_g", opt),
                                  weight(t, p + "lnf_b", opt));
        }
        taps.controller_output = t.slice_rows(h, hn - 1, 1);

        ForwardResult out;
        out.memory = memory;
        out.taps = std::move(taps);
        for (int k = 0; k < 4; ++k) {
            const std::string p = "head_" + std::to_string(k);
            out.head_logits[k] =
                t.add_rowvec(t.matmul(out.taps.controller_output, weight(t, p + "_w", opt)),
                             weight(t, p + "_b", opt));
        }
        return out;
    }

    // Greedy decoding: per-head argmax bin (ties to the lower bin) -> centers.
    struct Prediction {
        sim::ContinuousAction action;
        std::array<int, 4> bins;
        std::vector<double> controller_output;
        std::array<std::vector<double>, 4> logits;
    };

    Prediction predict_action(const PromptSequence& prompt, const History& history) const {
        Tape t;
        const ForwardResult fr = forward(t, prompt, history);
        Prediction p;
        for (int k = 0; k < 4; ++k) {
            p.logits[k] = fr.head_logits[k].values();
            p.bins[k] = argmax(p.logits[k]);
        }
        p.action = undiscretize_action(p.bins, cfg_.n_bins);
        p.controller_output = fr.taps.controller_output.values();
        return p;
    }

    static int argmax(const std::vector<double>& v) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(v.size()); ++i)
            if (v[i] > v[best]) best = i;
        return best;
    }

    // ---- checkpoint format -------------------------------------------------
    //
    //   PBCK1\n
    //   config <hidden> <heads> <enc> <ctl> <bins> <vocab> <maxp> <maxh> <ff>\n
    //   param <name> <ndim> <dims...>\n  followed by raw little-endian doubles
    //   ... (params in name order)
    //   end\n

    void save(std::ostream& os) const {
        os << "PBCK1\n";
        os << "config " << cfg_.hidden_dim << " " << cfg_.n_heads << " " << cfg_.n_encoder_layers
           << " " << cfg_.n_controller_layers << " " << cfg_.n_bins << " " << cfg_.vocab_size
           << " " << cfg_.max_prompt_len << " " << cfg_.max_history_len << " " << cfg_.ff_mult
           << " " << sim::detail::fmt_double(cfg_.attn_sharpness) << "\n";
        for (const auto& [name, p] : params_) {
            os << "param " << name << " " << p.shape.size();
            for (int dim : p.shape) os << " " << dim;
            os << "\n";
            os.write(reinterpret_cast<const char*>(p.value.data()),
                     static_cast<std::streamsize>(p.value.size() * sizeof(double)));
        }
        os << "end\n";
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ArtifactError("cannot write checkpoint: " + path);
        save(f);
    }

    static PolicyModel load(std::istream& is) {
        std::string line;
        if (!std::getline(is, line) || line != "PBCK1")
            throw ArtifactError("checkpoint: bad magic");
        if (!std::getline(is, line)) throw ArtifactError("checkpoint: missing config");
        ModelConfig cfg;
        {
            std::istringstream s(line);
            std::string kw;
            s >> kw >> cfg.hidden_dim >> cfg.n_heads >> cfg.n_encoder_layers >>
                cfg.n_controller_layers >> cfg.n_bins >> cfg.vocab_size >> cfg.max_prompt_len >>
                cfg.max_history_len >> cfg.ff_mult >> cfg.attn_sharpness;
            if (kw != "config" || !s) throw ArtifactError("checkpoint: bad config line");
        }
        PolicyModel m;
        m.cfg_ = cfg;
        m.cfg_.validate();
        m.build_param_table();
        m.build_pos_table();
        while (std::getline(is, line)) {
            if (line == "end") return m;
            std::istringstream s(line);
            std::string kw, name;
            std::size_t ndim;
            s >> kw >> name >> ndim;
            if (kw != "param" || !s) throw ArtifactError("checkpoint: bad param header");
            std::vector<int> shape(ndim);
            for (std::size_t i = 0; i < ndim; ++i) s >> shape[i];
            auto it = m.params_.find(name);
            if (it == m.params_.end()) throw ArtifactError("checkpoint: unknown param " + name);
            if (it->second.shape != shape)
                throw ArtifactError("checkpoint: shape mismatch for " + name);
            is.read(reinterpret_cast<char*>(it->second.value.data()),
                    static_cast<std::streamsize>(it->second.size() * sizeof(double)));
            if (!is) throw ArtifactError("checkpoint: truncated data for " + name);
        }
        throw ArtifactError("checkpoint: missing end marker");
    }

    static PolicyModel load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ArtifactError("cannot read checkpoint: " + path);
        return load(f);
    }

private:
    ModelConfig cfg_;
    std::map<std::string, Param> params_;
    std::vector<double> pos_table_;  // [max_prompt_len, hidden]

    // All prompt/history tensors bind named parameters lazily through this.
    Tensor weight(Tape& t, const std::string& name, const ForwardOptions& opt) const {
        const Param& p = param(name);
        return t.leaf_view(p.shape, p.value.data(), opt.weight_grads);
    }

    const Param& param(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }

    void append_prompt_segments(Tape& t, const PromptSequence& prompt, const ForwardOptions& opt,
                                std::vector<Tensor>& segs) const {
        std::vector<int> text_run;
        auto flush = [&] {
            if (!text_run.empty()) {
                segs.push_back(t.gather_rows(weight(t, "tok_embed", opt), text_run));
                text_run.clear();
            }
        };
        for (const PromptElem& e : prompt.elements) {
            if (const TextToken* tok = std::get_if<TextToken>(&e)) {
                if (tok->id < 0 || tok->id >= cfg_.vocab_size)
                    throw ContractError("token id out of vocabulary range");
                text_run.push_back(tok->id);
            } else {
                flush();
                const ObjectToken& o = std::get<ObjectToken>(e);
                Tensor feat = t.constant({1, kObjFeatDim}, object_features(o));
                segs.push_back(t.add_rowvec(t.matmul(feat, weight(t, "obj_proj_w", opt)),
                                            weight(t, "obj_proj_b", opt)));
            }
        }
        flush();
        if (segs.empty()) throw ContractError("empty prompt");
    }

    Tensor obs_token(Tape& t, const std::vector<sim::ObjectSpec>& objects,
                     const ForwardOptions& opt) const {
        // mean of object embeddings; a linear map, so mean features first
        std::vector<double> mean(kObjFeatDim, 0.0);
        if (!objects.empty()) {
            for (const sim::ObjectSpec& o : objects) {
                const std::vector<double> f = object_features(o);
                for (int i = 0; i < kObjFeatDim; ++i) mean[i] += f[i];
            }
            for (double& v : mean) v /= static_cast<double>(objects.size());
        }
        return t.add_rowvec(
            t.matmul(t.constant({1, kObjFeatDim}, std::move(mean)), weight(t, "obj_proj_w", opt)),
            weight(t, "obj_proj_b", opt));
    }

    Tensor action_token(Tape& t, const std::array<int, 4>& bins, const ForwardOptions& opt) const {
        std::vector<int> rows(4);
        for (int k = 0; k < 4; ++k) {
            if (bins[k] < 0 || bins[k] >= cfg_.n_bins)
                throw ContractError("history action bin out of range");
            rows[k] = k * cfg_.n_bins + bins[k];
        }
        return t.mean_rows(t.gather_rows(weight(t, "act_embed", opt), rows));
    }

    Tensor mha(Tape& t, Tensor q_in, Tensor kv_in, const std::string& p,
               const ForwardOptions& opt, int mask_lead_cols = 0) const {
        const int d = cfg_.hidden_dim, nh = cfg_.n_heads, dh = d / nh;
        Tensor q = t.matmul(q_in, weight(t, p + "_wq", opt));
        Tensor k = t.matmul(kv_in, weight(t, p + "_wk", opt));
        Tensor v = t.matmul(kv_in, weight(t, p + "_wv", opt));
        Tensor mask;
        if (mask_lead_cols > 0) {
            std::vector<double> m(static_cast<std::size_t>(q_in.rows()) * kv_in.rows(), 0.0);
            for (int r = 0; r < q_in.rows(); ++r)
                for (int c = 0; c < mask_lead_cols && c < kv_in.rows(); ++c)
                    m[static_cast<std::size_t>(r) * kv_in.rows() + c] = -1e30;
            mask = t.constant({q_in.rows(), kv_in.rows()}, std::move(m));
        }
        std::vector<Tensor> heads;
        heads.reserve(nh);
        const double scale = cfg_.attn_sharpness / std::sqrt(static_cast<double>(dh));
        for (int i = 0; i < nh; ++i) {
            Tensor qi = t.slice_cols(q, i * dh, dh);
            Tensor ki = t.slice_cols(k, i * dh, dh);
            Tensor vi = t.slice_cols(v, i * dh, dh);
            Tensor logits = t.scale(t.matmul_nt(qi, ki), scale);
            if (mask.valid()) logits = t.add(logits, mask);
            Tensor att = t.softmax(logits, 1);
            heads.push_back(t.matmul(att, vi));
        }
        return t.matmul(nh == 1 ? heads[0] : t.concat_cols(heads), weight(t, p + "_wo", opt));
    }

    Tensor feedforward(Tape& t, Tensor x, const std::string& p, const ForwardOptions& opt) const {
        Tensor h1 = t.relu(t.add_rowvec(t.matmul(x, weight(t, p + "ff_w1", opt)),
                                        weight(t, p + "ff_b1", opt)));
        return t.add_rowvec(t.matmul(h1, weight(t, p + "ff_w2", opt)), weight(t, p + "ff_b2", opt));
    }

    std::vector<double> pos_slice(int start, int len) const {
        const int d = cfg_.hidden_dim;
        return {pos_table_.begin() + static_cast<std::size_t>(start) * d,
                pos_table_.begin() + static_cast<std::size_t>(start + len) * d};
    }

    void build_pos_table() {
        const int d = cfg_.hidden_dim, n = cfg_.max_prompt_len;
        pos_table_.assign(static_cast<std::size_t>(n) * d, 0.0);
        for (int pos = 0; pos < n; ++pos)
            for (int i = 0; i < d / 2; ++i) {
                const double w = std::pow(10000.0, -2.0 * i / d);
                pos_table_[pos * d + 2 * i] = std::sin(pos * w);
                pos_table_[pos * d + 2 * i + 1] = std::cos(pos * w);
            }
    }

    void add_param(const std::string& name, std::vector<int> shape) {
        Param p;
        p.shape = std::move(shape);
        p.value.assign(detail::shape_size(p.shape), 0.0);
        params_.emplace(name, std::move(p));
    }

    void build_param_table() {
        const int d = cfg_.hidden_dim, ff = cfg_.ff_mult * d;
        add_param("tok_embed", {cfg_.vocab_size, d});
        add_param("obj_proj_w", {kObjFeatDim, d});
        add_param("obj_proj_b", {d});
        add_param("start_token", {1, d});
        add_param("act_embed", {4 * cfg_.n_bins, d});
        auto attn = [&](const std::string& p) {
            add_param(p + "_wq", {d, d});
            add_param(p + "_wk", {d, d});
            add_param(p + "_wv", {d, d});
            add_param(p + "_wo", {d, d});
        };
        auto ln = [&](const std::string& p) {
            add_param(p + "_g", {d});
            add_param(p + "_b", {d});
        };
        for (int l = 0; l < cfg_.n_encoder_layers; ++l) {
            const std::string p = "enc." + std::to_string(l) + ".";
            attn(p + "attn");
            ln(p + "ln1");
            add_param(p + "ff_w1", {d, ff});
            add_param(p + "ff_b1", {ff});
            add_param(p + "ff_w2", {ff, d});
            add_param(p + "ff_b2", {d});
            ln(p + "ln2");
        }
        for (int l = 0; l < cfg_.n_controller_layers; ++l) {
            const std::string p = "ctl." + std::to_string(l) + ".";
            attn(p + "cross");
            ln(p + "lnc");
            attn(p + "self");
            ln(p + "lns");
            add_param(p + "ff_w1", {d, ff});
            add_param(p + "ff_b1", {ff});
            add_param(p + "ff_w2", {ff, d});
            add_param(p + "ff_b2", {d});
            ln(p + "lnf");
        }
        for (int k = 0; k < 4; ++k) {
            add_param("head_" + std::to_string(k) + "_w", {d, cfg_.n_bins});
            add_param("head_" + std::to_string(k) + "_b", {cfg_.n_bins});
        }
    }

    void init_param(const std::string& name, Param& p, Rng& rng) {
        if (name.find("_g") == name.size() - 2 && name.find("ln") != std::string::npos) {
            std::fill(p.value.begin(), p.value.end(), 1.0);
            return;
        }
        if (name.ends_with("_b") || name == "obj_proj_b") {
            // biases start at zero (includes LN biases and head biases)
            std::fill(p.value.begin(), p.value.end(), 0.0);
            return;
        }
        if (p.shape.size() == 1) {
            for (double& v : p.value) v = rng.uniform_sym(0.1);
            return;
        }
        if (name == "tok_embed") {
            // zero init: rows of words that never occur in training data stay
            // identical to the pad row's starting point, so at any position
            // they read as pads to the attention layers; used rows move off
            // zero during training and become distinguishable
            std::fill(p.value.begin(), p.value.end(), 0.0);
            return;
        }
        const double fan_in = p.shape[0], fan_out = p.shape[p.shape.size() - 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : p.value) v = rng.uniform_sym(limit);
    }
};

}  // namespace pbench
