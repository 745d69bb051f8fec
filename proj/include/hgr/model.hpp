#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hgr/data.hpp"
#include "hgr/error.hpp"
#include "hgr/lstm.hpp"
#include "hgr/nn.hpp"
#include "hgr/rng.hpp"
#include "hgr/tensor.hpp"

namespace hgr {

// Architecture variants. two_stage is the full hierarchical model; the
// b-variants are the ablation baselines it is compared against.
enum class Variant {
    two_stage,
    b1_frame,
    b2_person_pool,
    b3_finetuned_person_pool,
    b4_temporal_image,
    b5_temporal_person,
    b6_no_lstm1,
    b7_no_lstm2,
};

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::two_stage: return "two_stage";
        case Variant::b1_frame: return "b1_frame";
        case Variant::b2_person_pool: return "b2_person_pool";
        case Variant::b3_finetuned_person_pool: return "b3_finetuned_person_pool";
        case Variant::b4_temporal_image: return "b4_temporal_image";
        case Variant::b5_temporal_person: return "b5_temporal_person";
        case Variant::b6_no_lstm1: return "b6_no_lstm1";
        case Variant::b7_no_lstm2: return "b7_no_lstm2";
    }
    return "?";
}

inline Variant parse_variant(const std::string& name) {
    for (Variant v : {Variant::two_stage, Variant::b1_frame, Variant::b2_person_pool,
                      Variant::b3_finetuned_person_pool, Variant::b4_temporal_image,
                      Variant::b5_temporal_person, Variant::b6_no_lstm1, Variant::b7_no_lstm2}) {
        if (name == variant_name(v)) return v;
    }
    throw InputError("unknown variant '" + name + "'");
}

// The person-level temporal model (stage 1) exists in two_stage and b7; the
// group-level temporal model (stage 2 LSTM) exists in two_stage, b4, b5, b6.
inline bool uses_lstm1(Variant v) { return v == Variant::two_stage || v == Variant::b7_no_lstm2; }

inline bool uses_lstm2(Variant v) {
    return v == Variant::two_stage || v == Variant::b4_temporal_image ||
           v == Variant::b5_temporal_person || v == Variant::b6_no_lstm1;
}

inline bool uses_encoder(Variant v) { return v != Variant::b4_temporal_image; }

inline bool uses_group_fc(Variant v) {
    return v == Variant::two_stage || v == Variant::b6_no_lstm1 || v == Variant::b7_no_lstm2;
}

inline bool uses_action_head(Variant v) {
    return uses_lstm1(v) || v == Variant::b6_no_lstm1 || v == Variant::b3_finetuned_person_pool;
}

// Scene-level (whole-frame) input instead of per-person modeling.
inline bool scene_level_input(Variant v) {
    return v == Variant::b1_frame || v == Variant::b4_temporal_image;
}

struct ModelConfig {
    std::size_t feature_dim = 12;    // D_in
    std::size_t encoder_dim = 16;    // encoder output width
    std::size_t lstm1_hidden = 24;   // person LSTM
    std::size_t group_fc_dim = 24;   // group-stage FC width
    std::size_t lstm2_hidden = 12;   // group LSTM
    std::size_t timesteps = 9;
    std::size_t num_actions = 5;
    std::size_t num_activities = 6;
    PoolMode pool = PoolMode::max;
    Variant variant = Variant::two_stage;
};

// Small configuration used by the gradient-check harness.
inline ModelConfig tiny_config() {
    ModelConfig c;
    c.feature_dim = 6;
    c.encoder_dim = 5;
    c.lstm1_hidden = 8;
    c.group_fc_dim = 8;
    c.lstm2_hidden = 8;
    c.timesteps = 5;
    c.num_actions = 3;
    c.num_activities = 4;
    c.variant = Variant::two_stage;
    return c;
}

inline void validate(const ModelConfig& c) {
    for (std::size_t d : {c.feature_dim, c.encoder_dim, c.lstm1_hidden, c.group_fc_dim,
                          c.lstm2_hidden, c.timesteps, c.num_actions, c.num_activities}) {
        if (d == 0) throw ConfigError("model config: all dimensions must be positive");
    }
}

// Stage-1 parameters: feature encoder, person LSTM, per-frame action head.
struct PersonModel {
    FcParams encoder;
    LstmParams lstm1;
    FcParams action_head;
};

// Stage-2 parameters: group FC, group LSTM, activity head.
struct GroupModel {
    FcParams group_fc;
    LstmParams lstm2;
    FcParams activity_head;
};

// One parameter bundle covering every variant; parts a variant does not use
// stay empty. Enumeration order of tensors() is the checkpoint layout.
struct Model {
    ModelConfig config;
    PersonModel person;
    GroupModel group;
};

// Width of the pooled per-person representation fed to the group stage.
inline std::size_t group_input_dim(const ModelConfig& c) {
    switch (c.variant) {
        case Variant::two_stage:
        case Variant::b7_no_lstm2:
            return c.encoder_dim + c.lstm1_hidden;  // enc (+) h
        case Variant::b6_no_lstm1:
            return c.encoder_dim;  // enc only
        default:
            return 0;
    }
}

inline Model model_init(const ModelConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    Rng rng(seed);
    Model m;
    m.config = cfg;
    const Variant v = cfg.variant;

    if (uses_encoder(v)) {
        m.person.encoder = fc_init(cfg.feature_dim, cfg.encoder_dim, Activation::relu, rng);
    }
    if (uses_lstm1(v)) {
        m.person.lstm1 = lstm_init(cfg.encoder_dim, cfg.lstm1_hidden, rng);
    }
    if (uses_action_head(v)) {
        const std::size_t in = uses_lstm1(v) ? cfg.lstm1_hidden : cfg.encoder_dim;
        m.person.action_head = fc_init(in, cfg.num_actions, Activation::linear, rng, true);
    }
    if (uses_group_fc(v)) {
        m.group.group_fc = fc_init(group_input_dim(cfg), cfg.group_fc_dim, Activation::relu, rng);
    }
    if (uses_lstm2(v)) {
        std::size_t in = 0;
        switch (v) {
            case Variant::two_stage:
            case Variant::b6_no_lstm1:
                in = cfg.group_fc_dim;
                break;
            case Variant::b4_temporal_image:
                in = cfg.feature_dim;
                break;
            case Variant::b5_temporal_person:
                in = cfg.encoder_dim;
                break;
            default:
                break;
        }
        m.group.lstm2 = lstm_init(in, cfg.lstm2_hidden, rng);
    }
    // activity head input width follows the variant's last representation
    std::size_t head_in = 0;
    switch (v) {
        case Variant::two_stage:
        case Variant::b4_temporal_image:
        case Variant::b5_temporal_person:
        case Variant::b6_no_lstm1:
            head_in = cfg.lstm2_hidden;
            break;
        case Variant::b7_no_lstm2:
            head_in = cfg.group_fc_dim;
            break;
        case Variant::b1_frame:
        case Variant::b2_person_pool:
        case Variant::b3_finetuned_person_pool:
            head_in = cfg.encoder_dim;
            break;
    }
    m.group.activity_head = fc_init(head_in, cfg.num_activities, Activation::linear, rng, true);
    return m;
}

// Classifier heads start at zero so an untrained model emits uniform class
// probabilities. The gradient-check harness randomizes them afterwards to
// give every lower layer a nonzero downstream path.
inline void randomize_heads(Model& m, Rng& rng) {
    for (FcParams* head : {&m.person.action_head, &m.group.activity_head}) {
        if (head->empty()) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(head->in_dim()));
        for (std::size_t i = 0; i < head->w.size(); ++i) head->w[i] = rng.uniform(-bound, bound);
        for (std::size_t i = 0; i < head->b.size(); ++i) head->b[i] = rng.uniform(-bound, bound);
    }
}

inline Model zeros_like(const Model& m) {
    Model z;
    z.config = m.config;
    auto zero_fc = [](const FcParams& p) {
        FcParams g;
        g.w = zeros_like(p.w);
        g.b = zeros_like(p.b);
        g.act = p.act;
        return g;
    };
    z.person.encoder = zero_fc(m.person.encoder);
    if (!m.person.lstm1.empty()) {
        z.person.lstm1 = lstm_zeros(m.person.lstm1.input_dim(), m.person.lstm1.hidden_dim());
    }
    z.person.action_head = zero_fc(m.person.action_head);
    z.group.group_fc = zero_fc(m.group.group_fc);
    if (!m.group.lstm2.empty()) {
        z.group.lstm2 = lstm_zeros(m.group.lstm2.input_dim(), m.group.lstm2.hidden_dim());
    }
    z.group.activity_head = zero_fc(m.group.activity_head);
    return z;
}

namespace detail {

inline void append_fc(std::vector<Tensor*>& out, FcParams& p) {
    if (!p.empty()) {
        out.push_back(&p.w);
        out.push_back(&p.b);
    }
}

inline void append_lstm(std::vector<Tensor*>& out, LstmParams& p) {
    if (!p.empty()) {
        for (Tensor* t : p.tensors()) out.push_back(t);
    }
}

}  // namespace detail

// Tensors optimized during stage 1 (person-level action training).
inline std::vector<Tensor*> person_tensors(Model& m) {
    std::vector<Tensor*> out;
    const Variant v = m.config.variant;
    if (uses_lstm1(v) || v == Variant::b6_no_lstm1 || v == Variant::b3_finetuned_person_pool) {
        detail::append_fc(out, m.person.encoder);
        detail::append_lstm(out, m.person.lstm1);
        detail::append_fc(out, m.person.action_head);
    }
    return out;
}

// Tensors optimized when training the activity classifier (stage 2, or the
// single phase of the one-step baselines).
inline std::vector<Tensor*> group_tensors(Model& m) {
    std::vector<Tensor*> out;
    switch (m.config.variant) {
        case Variant::two_stage:
        case Variant::b6_no_lstm1:
        case Variant::b7_no_lstm2:
            detail::append_fc(out, m.group.group_fc);
            detail::append_lstm(out, m.group.lstm2);
            detail::append_fc(out, m.group.activity_head);
            break;
        case Variant::b1_frame:
        case Variant::b5_temporal_person:
            detail::append_fc(out, m.person.encoder);
            detail::append_lstm(out, m.group.lstm2);
            detail::append_fc(out, m.group.activity_head);
            break;
        case Variant::b2_person_pool:
        case Variant::b3_finetuned_person_pool:
            detail::append_fc(out, m.group.activity_head);
            break;
        case Variant::b4_temporal_image:
            detail::append_lstm(out, m.group.lstm2);
            detail::append_fc(out, m.group.activity_head);
            break;
    }
    return out;
}

// Every active tensor, in the fixed checkpoint order.
inline std::vector<Tensor*> all_tensors(Model& m) {
    std::vector<Tensor*> out;
    detail::append_fc(out, m.person.encoder);
    detail::append_lstm(out, m.person.lstm1);
    detail::append_fc(out, m.person.action_head);
    detail::append_fc(out, m.group.group_fc);
    detail::append_lstm(out, m.group.lstm2);
    detail::append_fc(out, m.group.activity_head);
    return out;
}

inline std::size_t param_count(const Model& m) {
    std::size_t n = 0;
    for (const Tensor* t : all_tensors(const_cast<Model&>(m))) n += t->size();
    return n;
}

// ---------------------------------------------------------------------------
// Forward passes.
// ---------------------------------------------------------------------------

// Stage-1 pass over one tracklet. hidden[t] is the person LSTM state when the
// variant has one, otherwise the encoder output itself; action logits exist
// only for variants with an action head.
struct PersonForward {
    std::vector<Tensor> enc;
    std::vector<FcCache> enc_cache;
    LstmForward lstm;
    std::vector<Tensor> action_logits;
    std::vector<FcCache> head_cache;
};

inline PersonForward person_forward(const Model& m, const std::vector<Tensor>& tracklet,
                                    bool want_action_logits = true) {
    if (tracklet.empty()) throw InputError("person_forward: empty tracklet");
    PersonForward out;
    const std::size_t t_len = tracklet.size();
    out.enc.resize(t_len);
    out.enc_cache.resize(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        out.enc[t] = fc_forward(m.person.encoder, tracklet[t], &out.enc_cache[t]);
    }
    if (uses_lstm1(m.config.variant)) {
        out.lstm = lstm_forward(m.person.lstm1, out.enc);
    }
    if (want_action_logits && !m.person.action_head.empty()) {
        out.action_logits.resize(t_len);
        out.head_cache.resize(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            const Tensor& h =
                uses_lstm1(m.config.variant) ? out.lstm.states[t].h : out.enc[t];
            out.action_logits[t] = fc_forward(m.person.action_head, h, &out.head_cache[t]);
        }
    }
    return out;
}

// Whole-scene pass producing per-timestep activity logits. Caches are kept
// for every layer so the reverse pass is exact.
struct SceneForward {
    std::vector<PersonForward> persons;   // per-person stage-1 results
    std::vector<Tensor> scene_feat;       // b1/b4 frame-level inputs
    std::vector<Tensor> pooled;           // Z_t
    std::vector<PoolCache> pool_cache;
    std::vector<FcCache> group_fc_cache;
    std::vector<Tensor> group_fc_out;
    LstmForward lstm2;
    std::vector<FcCache> head_cache;
    std::vector<Tensor> activity_logits;  // T x G
};

inline void check_scene(const Model& m, const Scene& scene) {
    if (scene.num_persons() == 0) throw InputError("scene " + scene.id + " has no persons");
    const std::size_t t_len = scene.num_timesteps();
    if (t_len == 0) throw InputError("scene " + scene.id + " has no timesteps");
    for (const auto& tracklet : scene.persons) {
        if (tracklet.size() != t_len) {
            throw InputError("scene " + scene.id + ": ragged tracklet lengths");
        }
        for (const Tensor& x : tracklet) {
            if (x.size() != m.config.feature_dim) {
                throw DimensionError("scene " + scene.id + ": feature length " +
                                     std::to_string(x.size()) + " does not match model dim " +
                                     std::to_string(m.config.feature_dim));
            }
        }
    }
}

// Per-timestep mean of the person features: the stand-in for a whole-frame
// descriptor used by the image-level baselines.
inline std::vector<Tensor> scene_mean_features(const Scene& scene) {
    const std::size_t t_len = scene.num_timesteps();
    const std::size_t k = scene.num_persons();
    std::vector<Tensor> mean(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        Tensor acc = zeros_like(scene.persons[0][t]);
        for (std::size_t i = 0; i < k; ++i) add_inplace(acc, scene.persons[i][t]);
        scale_inplace(acc, 1.0 / static_cast<double>(k));
        mean[t] = std::move(acc);
    }
    return mean;
}

inline SceneForward scene_forward(const Model& m, const Scene& scene) {
    check_scene(m, scene);
    const Variant v = m.config.variant;
    const std::size_t t_len = scene.num_timesteps();
    const std::size_t k = scene.num_persons();
    SceneForward out;

    std::vector<Tensor> head_in(t_len);

    if (scene_level_input(v)) {
        out.scene_feat = scene_mean_features(scene);
        if (v == Variant::b1_frame) {
            out.group_fc_cache.resize(t_len);
            out.group_fc_out.resize(t_len);
            for (std::size_t t = 0; t < t_len; ++t) {
                out.group_fc_out[t] =
                    fc_forward(m.person.encoder, out.scene_feat[t], &out.group_fc_cache[t]);
                head_in[t] = out.group_fc_out[t];
            }
        } else {  // b4: frame features straight into the group LSTM
            out.lstm2 = lstm_forward(m.group.lstm2, out.scene_feat);
            for (std::size_t t = 0; t < t_len; ++t) head_in[t] = out.lstm2.states[t].h;
        }
    } else {
        out.persons.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            out.persons.push_back(person_forward(m, scene.persons[i], false));
        }
        out.pooled.resize(t_len);
        out.pool_cache.resize(t_len);
        const bool with_hidden = uses_lstm1(v);
        std::vector<Tensor> per_person(k);
        for (std::size_t t = 0; t < t_len; ++t) {
            for (std::size_t i = 0; i < k; ++i) {
                per_person[i] = with_hidden
                                    ? concat(out.persons[i].enc[t], out.persons[i].lstm.states[t].h)
                                    : out.persons[i].enc[t];
            }
            out.pooled[t] = pool_persons(per_person, m.config.pool, &out.pool_cache[t]);
        }
        std::vector<Tensor>* lstm_in = &out.pooled;
        if (uses_group_fc(v)) {
            out.group_fc_cache.resize(t_len);
            out.group_fc_out.resize(t_len);
            for (std::size_t t = 0; t < t_len; ++t) {
                out.group_fc_out[t] =
                    fc_forward(m.group.group_fc, out.pooled[t], &out.group_fc_cache[t]);
            }
            lstm_in = &out.group_fc_out;
        }
        if (uses_lstm2(v)) {
            out.lstm2 = lstm_forward(m.group.lstm2, *lstm_in);
            for (std::size_t t = 0; t < t_len; ++t) head_in[t] = out.lstm2.states[t].h;
        } else {
            for (std::size_t t = 0; t < t_len; ++t) head_in[t] = (*lstm_in)[t];
        }
    }

    out.activity_logits.resize(t_len);
    out.head_cache.resize(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        out.activity_logits[t] =
            fc_forward(m.group.activity_head, head_in[t], &out.head_cache[t]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backward passes.
// ---------------------------------------------------------------------------

inline void add_lstm_grads(LstmParams& acc, const LstmParams& g) {
    auto a = acc.tensors();
    auto b = g.tensors();
    for (std::size_t i = 0; i < a.size(); ++i) add_inplace(*a[i], *b[i]);
}

// Reverse of scene_forward given dL/dlogits at every timestep. Gradients
// accumulate into `grads` (a zeros_like(m) holder). When `into_person` is
// false the pass stops at the pooling layer for the two-step variants, which
// is how stage-2 training keeps stage 1 frozen; variants whose single
// training phase includes the encoder always propagate into it.
inline void scene_backward(const Model& m, const Scene& scene, const SceneForward& f,
                           const std::vector<Tensor>& dlogits, Model& grads, bool into_person) {
    const Variant v = m.config.variant;
    const std::size_t t_len = scene.num_timesteps();
    const std::size_t k = scene.num_persons();
    if (dlogits.size() != t_len) {
        throw InputError("scene_backward: dlogits length does not match timesteps");
    }

    // head gradients, collected per timestep on the head's input
    std::vector<Tensor> d_head_in(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        d_head_in[t] = Tensor::vec(m.group.activity_head.in_dim());
        fc_backward(m.group.activity_head, f.head_cache[t], dlogits[t], grads.group.activity_head,
                    &d_head_in[t]);
    }

    if (v == Variant::b1_frame) {
        // head input was the encoder output on the frame feature
        for (std::size_t t = 0; t < t_len; ++t) {
            fc_backward(m.person.encoder, f.group_fc_cache[t], d_head_in[t], grads.person.encoder,
                        nullptr);
        }
        return;
    }
    if (v == Variant::b4_temporal_image) {
        // dx is discarded: the inputs are frame-level data, not parameters
        LstmBackward lb = lstm_backward(m.group.lstm2, f.lstm2.tape, d_head_in);
        add_lstm_grads(grads.group.lstm2, lb.grads);
        return;
    }

    // group LSTM (when present) turns head-input grads into grads on its
    // input sequence
    std::vector<Tensor> d_seq;
    if (uses_lstm2(v)) {
        LstmBackward lb = lstm_backward(m.group.lstm2, f.lstm2.tape, d_head_in);
        add_lstm_grads(grads.group.lstm2, lb.grads);
        d_seq = std::move(lb.dx);
    } else {
        d_seq = std::move(d_head_in);
    }

    // group FC back to the pooled vectors
    std::vector<Tensor> d_pooled(t_len);
    if (uses_group_fc(v)) {
        for (std::size_t t = 0; t < t_len; ++t) {
            d_pooled[t] = Tensor::vec(m.group.group_fc.in_dim());
            fc_backward(m.group.group_fc, f.group_fc_cache[t], d_seq[t], grads.group.group_fc,
                        &d_pooled[t]);
        }
    } else {
        d_pooled = std::move(d_seq);
    }

    // b5's single training phase includes its encoder; every other pooled
    // variant keeps the person side frozen unless the caller asks otherwise.
    const bool encoder_updates = v == Variant::b5_temporal_person;
    if (!into_person && !encoder_updates) return;

    // pool back to per-person vectors
    const bool with_hidden = uses_lstm1(v);
    const std::size_t d_enc = m.config.encoder_dim;
    std::vector<std::vector<Tensor>> d_person(k);  // per person, per t, on the pooled input
    for (std::size_t i = 0; i < k; ++i) {
        d_person[i].assign(t_len, Tensor::vec(with_hidden ? d_enc + m.config.lstm1_hidden : d_enc));
    }
    std::vector<Tensor> slot(k);
    for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t i = 0; i < k; ++i) slot[i] = std::move(d_person[i][t]);
        pool_backward(d_pooled[t], f.pool_cache[t], slot);
        for (std::size_t i = 0; i < k; ++i) d_person[i][t] = std::move(slot[i]);
    }

    for (std::size_t i = 0; i < k; ++i) {
        std::vector<Tensor> d_enc_t(t_len, Tensor::vec(d_enc));
        if (with_hidden) {
            std::vector<Tensor> d_h(t_len, Tensor::vec(m.config.lstm1_hidden));
            for (std::size_t t = 0; t < t_len; ++t) {
                concat_backward(d_person[i][t], d_enc, d_enc_t[t], d_h[t]);
            }
            LstmBackward lb = lstm_backward(m.person.lstm1, f.persons[i].lstm.tape, d_h);
            add_lstm_grads(grads.person.lstm1, lb.grads);
            for (std::size_t t = 0; t < t_len; ++t) add_inplace(d_enc_t[t], lb.dx[t]);
        } else {
            for (std::size_t t = 0; t < t_len; ++t) d_enc_t[t] = std::move(d_person[i][t]);
        }
        for (std::size_t t = 0; t < t_len; ++t) {
            fc_backward(m.person.encoder, f.persons[i].enc_cache[t], d_enc_t[t],
                        grads.person.encoder, nullptr);
        }
    }
}

// ---------------------------------------------------------------------------
// Losses and prediction.
// ---------------------------------------------------------------------------

// Mean per-timestep action cross-entropy over all persons of a scene;
// accumulates stage-1 gradients when grads is non-null.
inline double stage1_loss(const Model& m, const Scene& scene, Model* grads) {
    check_scene(m, scene);
    if (m.person.action_head.empty()) {
        throw ConfigError(std::string("variant ") + variant_name(m.config.variant) +
                          " has no person-level action model");
    }
    const std::size_t k = scene.num_persons();
    const std::size_t t_len = scene.num_timesteps();
    const double scale = 1.0 / static_cast<double>(k * t_len);
    double loss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        PersonForward pf = person_forward(m, scene.persons[i], true);
        std::vector<Tensor> d_h(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            const std::size_t label = scene.actions[i][t];
            if (label >= m.config.num_actions) {
                throw InputError("scene " + scene.id + ": action label out of range");
            }
            SoftmaxXent sx = softmax_xent(pf.action_logits[t], label);
            loss += sx.loss * scale;
            if (grads) {
                Tensor dlogits = softmax_xent_backward(sx, label);
                scale_inplace(dlogits, scale);
                d_h[t] = Tensor::vec(m.person.action_head.in_dim());
                fc_backward(m.person.action_head, pf.head_cache[t], dlogits,
                            grads->person.action_head, &d_h[t]);
            }
        }
        if (grads) {
            std::vector<Tensor> d_enc_t(t_len, Tensor::vec(m.config.encoder_dim));
            if (uses_lstm1(m.config.variant)) {
                LstmBackward lb = lstm_backward(m.person.lstm1, pf.lstm.tape, d_h);
                add_lstm_grads(grads->person.lstm1, lb.grads);
                for (std::size_t t = 0; t < t_len; ++t) d_enc_t[t] = std::move(lb.dx[t]);
            } else {
                d_enc_t = std::move(d_h);
            }
            for (std::size_t t = 0; t < t_len; ++t) {
                fc_backward(m.person.encoder, pf.enc_cache[t], d_enc_t[t], grads->person.encoder,
                            nullptr);
            }
        }
    }
    return loss;
}

// Mean per-timestep activity cross-entropy; accumulates gradients for the
// variant's activity-phase tensors (and, when into_person is set, for the
// whole graph down to the encoder).
inline double stage2_loss(const Model& m, const Scene& scene, Model* grads,
                          bool into_person = false) {
    if (scene.activity >= m.config.num_activities) {
        throw InputError("scene " + scene.id + ": activity label out of range");
    }
    SceneForward f = scene_forward(m, scene);
    const std::size_t t_len = scene.num_timesteps();
    const double scale = 1.0 / static_cast<double>(t_len);
    double loss = 0.0;
    std::vector<Tensor> dlogits(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        SoftmaxXent sx = softmax_xent(f.activity_logits[t], scene.activity);
        loss += sx.loss * scale;
        if (grads) {
            dlogits[t] = softmax_xent_backward(sx, scene.activity);
            scale_inplace(dlogits[t], scale);
        }
    }
    if (grads) scene_backward(m, scene, f, dlogits, *grads, into_person);
    return loss;
}

// Sums logits across timesteps and returns the argmax class; ties resolve to
// the lowest class index.
inline std::size_t predict_sequence(const std::vector<Tensor>& logits) {
    if (logits.empty()) throw InputError("predict_sequence: empty logits");
    Tensor total = zeros_like(logits[0]);
    for (const Tensor& l : logits) add_inplace(total, l);
    std::size_t best = 0;
    for (std::size_t c = 1; c < total.size(); ++c) {
        if (total[c] > total[best]) best = c;
    }
    return best;
}

inline std::size_t predict_scene(const Model& m, const Scene& scene) {
    return predict_sequence(scene_forward(m, scene).activity_logits);
}

// Smallest distance from any relu pre-activation to zero and from any
// max-pool coordinate to its runner-up over a forward pass. Central
// differences are only trustworthy when this margin dwarfs the probe step,
// so the gradient-check harness rejects probe points where it is small.
inline double kink_margin(const Model& m, const Scene& scene) {
    SceneForward f = scene_forward(m, scene);
    double margin = std::numeric_limits<double>::infinity();

    auto scan_relu = [&](const FcParams& p, const std::vector<FcCache>& caches) {
        if (p.empty() || p.act != Activation::relu) return;
        for (const FcCache& c : caches) {
            for (std::size_t j = 0; j < c.pre.size(); ++j) {
                margin = std::min(margin, std::abs(c.pre[j]));
            }
        }
    };
    for (const PersonForward& pf : f.persons) scan_relu(m.person.encoder, pf.enc_cache);
    scan_relu(uses_group_fc(m.config.variant) ? m.group.group_fc : m.person.encoder,
              f.group_fc_cache);

    if (m.config.pool == PoolMode::max && !f.persons.empty() && scene.num_persons() > 1) {
        const bool with_hidden = uses_lstm1(m.config.variant);
        for (std::size_t t = 0; t < scene.num_timesteps(); ++t) {
            std::vector<Tensor> per_person(scene.num_persons());
            for (std::size_t i = 0; i < scene.num_persons(); ++i) {
                per_person[i] = with_hidden
                                    ? concat(f.persons[i].enc[t], f.persons[i].lstm.states[t].h)
                                    : f.persons[i].enc[t];
            }
            for (std::size_t j = 0; j < per_person[0].size(); ++j) {
                double top = -std::numeric_limits<double>::infinity();
                double second = top;
                for (const Tensor& v : per_person) {
                    if (v[j] > top) {
                        second = top;
                        top = v[j];
                    } else if (v[j] > second) {
                        second = v[j];
                    }
                }
                // exact 0-0 ties come from strictly clamped relus, where the
                // pooled coordinate is locally constant, not a kink
                if (top == 0.0 && second == 0.0) continue;
                margin = std::min(margin, top - second);
            }
        }
    }
    return margin;
}

}  // namespace hgr
