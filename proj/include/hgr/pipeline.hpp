#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hgr/data.hpp"
#include "hgr/error.hpp"
#include "hgr/model.hpp"
#include "hgr/optim.hpp"

namespace hgr {

struct TrainConfig {
    std::size_t epochs = 60;
    double lr = 0.05;       // desk-scale default; the reference protocol value
                            // of 0.00001 is tuned to much larger gradients
    double momentum = 0.9;
};

struct TrainReport {
    std::string phase;                // "stage1", "stage2", "single"
    double initial_loss = 0.0;        // mean loss before any update
    std::vector<double> epoch_loss;   // mean loss per epoch
    double train_accuracy = std::numeric_limits<double>::quiet_NaN();
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    ModelConfig config;
};

namespace detail {

using LossFn = double (*)(const Model&, const Scene&, Model*);

inline double mean_loss(const Model& m, const std::vector<Scene>& scenes, LossFn fn) {
    double total = 0.0;
    for (const Scene& s : scenes) total += fn(m, s, nullptr);
    return total / static_cast<double>(scenes.size());
}

// Per-scene SGD: compute one scene's gradient, step, repeat, with a seeded
// shuffle each epoch. Throws DivergenceError naming the epoch if the loss
// stops being finite.
inline TrainReport run_sgd(Model& m, const std::vector<Scene>& scenes,
                           const std::vector<Tensor*>& params, LossFn fn,
                           const TrainConfig& tc, std::uint64_t seed, const char* phase) {
    if (scenes.empty()) throw InputError("training requires at least one scene");
    const auto start = std::chrono::steady_clock::now();
    TrainReport report;
    report.phase = phase;
    report.seed = seed;
    report.config = m.config;
    report.initial_loss = mean_loss(m, scenes, fn);

    OptimState opt = make_optim(params, tc.lr, tc.momentum);
    Rng order_rng(seed);
    std::vector<std::size_t> order(scenes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    Model grad_holder = zeros_like(m);
    std::vector<Tensor*> grad_ptrs;
    {
        // align gradient tensors with the parameter list by position in the
        // full enumeration
        std::vector<Tensor*> all_p = all_tensors(m);
        std::vector<Tensor*> all_g = all_tensors(grad_holder);
        for (Tensor* p : params) {
            for (std::size_t i = 0; i < all_p.size(); ++i) {
                if (all_p[i] == p) {
                    grad_ptrs.push_back(all_g[i]);
                    break;
                }
            }
        }
    }
    if (grad_ptrs.size() != params.size()) {
        throw ConfigError("run_sgd: training tensors are not part of the model");
    }
    std::vector<const Tensor*> grad_view(grad_ptrs.begin(), grad_ptrs.end());

    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        order_rng.shuffle(order);
        double total = 0.0;
        for (std::size_t idx : order) {
            for (Tensor* g : grad_ptrs) fill(*g, 0.0);
            try {
                const double loss = fn(m, scenes[idx], &grad_holder);
                if (!std::isfinite(loss)) throw DivergenceError("non-finite loss");
                total += loss;
                sgd_step(params, grad_view, opt);
            } catch (const DivergenceError& e) {
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch + 1) +
                                      ": " + e.what());
            }
        }
        report.epoch_loss.push_back(total / static_cast<double>(scenes.size()));
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

inline double stage1_loss_fn(const Model& m, const Scene& s, Model* g) {
    return stage1_loss(m, s, g);
}

inline double stage2_loss_fn(const Model& m, const Scene& s, Model* g) {
    return stage2_loss(m, s, g, false);
}

}  // namespace detail

// Stage 1: person-level action training (encoder, person LSTM when present,
// action head) on per-timestep action labels.
inline TrainReport train_stage1(Model& m, const std::vector<Scene>& scenes,
                                const TrainConfig& tc, std::uint64_t seed) {
    std::vector<Tensor*> params = person_tensors(m);
    if (params.empty()) {
        throw ConfigError(std::string("variant ") + variant_name(m.config.variant) +
                          " has no person-level training stage");
    }
    TrainReport r = detail::run_sgd(m, scenes, params, detail::stage1_loss_fn, tc, seed, "stage1");

    // stage-1 training accuracy: per-timestep action prediction
    std::size_t hits = 0, total = 0;
    for (const Scene& s : scenes) {
        for (std::size_t i = 0; i < s.num_persons(); ++i) {
            PersonForward pf = person_forward(m, s.persons[i], true);
            for (std::size_t t = 0; t < s.num_timesteps(); ++t) {
                std::size_t best = 0;
                const Tensor& l = pf.action_logits[t];
                for (std::size_t c = 1; c < l.size(); ++c) {
                    if (l[c] > l[best]) best = c;
                }
                hits += best == s.actions[i][t] ? 1 : 0;
                ++total;
            }
        }
    }
    r.train_accuracy = static_cast<double>(hits) / static_cast<double>(total);
    return r;
}

// Stage 2: group-level activity training. Stage-1 parameters are never
// touched (the optimizer only sees the variant's activity-phase tensors and
// the backward pass stops above them).
inline TrainReport train_stage2(Model& m, const std::vector<Scene>& scenes,
                                const TrainConfig& tc, std::uint64_t seed) {
    std::vector<Tensor*> params = group_tensors(m);
    TrainReport r = detail::run_sgd(m, scenes, params, detail::stage2_loss_fn, tc, seed, "stage2");

    std::size_t hits = 0;
    for (const Scene& s : scenes) hits += predict_scene(m, s) == s.activity ? 1 : 0;
    r.train_accuracy = static_cast<double>(hits) / static_cast<double>(scenes.size());
    return r;
}

// Full training protocol for any variant: a person-level stage when the
// variant has one, then the activity stage. Every phase uses the same
// budget and seed.
inline Model train_variant(const ModelConfig& cfg, const std::vector<Scene>& scenes,
                           const TrainConfig& tc, std::uint64_t seed,
                           std::vector<TrainReport>* reports = nullptr) {
    Model m = model_init(cfg, seed);
    if (!person_tensors(m).empty()) {
        TrainReport r1 = train_stage1(m, scenes, tc, seed);
        if (reports) reports->push_back(std::move(r1));
    }
    TrainReport r2 = train_stage2(m, scenes, tc, seed);
    if (reports) reports->push_back(std::move(r2));
    return m;
}

// ---------------------------------------------------------------------------
// Evaluation.
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::int64_t> counts;  // row-major, rows = true class

    explicit ConfusionMatrix(std::size_t g = 0) : num_classes(g), counts(g * g, 0) {}

    std::int64_t& at(std::size_t truth, std::size_t pred) {
        return counts[truth * num_classes + pred];
    }
    std::int64_t at(std::size_t truth, std::size_t pred) const {
        return counts[truth * num_classes + pred];
    }
    std::int64_t row_sum(std::size_t truth) const {
        std::int64_t s = 0;
        for (std::size_t c = 0; c < num_classes; ++c) s += at(truth, c);
        return s;
    }
    std::int64_t total() const {
        std::int64_t s = 0;
        for (std::int64_t v : counts) s += v;
        return s;
    }

    std::string to_csv() const {
        std::ostringstream out;
        out << "true\\pred";
        for (std::size_t c = 0; c < num_classes; ++c) out << "," << activity_name(c);
        out << "\n";
        for (std::size_t r = 0; r < num_classes; ++r) {
            out << activity_name(r);
            for (std::size_t c = 0; c < num_classes; ++c) out << "," << at(r, c);
            out << "\n";
        }
        return out.str();
    }
};

struct EvalResult {
    double accuracy = 0.0;
    ConfusionMatrix cm;
};

// Scene-level accuracy and confusion counts. jobs > 1 evaluates scenes in
// parallel; predictions are merged in scene order so the result does not
// depend on the thread count.
inline EvalResult evaluate(const Model& m, const std::vector<Scene>& scenes,
                           std::size_t jobs = 1) {
    if (scenes.empty()) throw InputError("evaluate: empty dataset");
    std::vector<std::size_t> preds(scenes.size());
    if (jobs <= 1 || scenes.size() < 2) {
        for (std::size_t i = 0; i < scenes.size(); ++i) preds[i] = predict_scene(m, scenes[i]);
    } else {
        const std::size_t n_threads = std::min(jobs, scenes.size());
        std::vector<std::thread> workers;
        workers.reserve(n_threads);
        for (std::size_t w = 0; w < n_threads; ++w) {
            workers.emplace_back([&, w]() {
                for (std::size_t i = w; i < scenes.size(); i += n_threads) {
                    preds[i] = predict_scene(m, scenes[i]);
                }
            });
        }
        for (std::thread& th : workers) th.join();
    }
    EvalResult out;
    out.cm = ConfusionMatrix(m.config.num_activities);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        if (scenes[i].activity >= m.config.num_activities) {
            throw InputError("evaluate: scene " + scenes[i].id + " has activity label " +
                             std::to_string(scenes[i].activity) + " but the model has " +
                             std::to_string(m.config.num_activities) + " classes");
        }
        out.cm.at(scenes[i].activity, preds[i]) += 1;
        hits += preds[i] == scenes[i].activity ? 1 : 0;
    }
    out.accuracy = static_cast<double>(hits) / static_cast<double>(scenes.size());
    return out;
}

// ---------------------------------------------------------------------------
// Baseline benchmark.
// ---------------------------------------------------------------------------

struct BenchRow {
    Variant variant;
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
};

struct BenchTable {
    std::vector<BenchRow> rows;

    std::string to_csv() const {
        std::ostringstream out;
        out << "variant,test_accuracy,status\n";
        for (const BenchRow& r : rows) {
            out << variant_name(r.variant) << ",";
            if (std::isfinite(r.test_accuracy)) out << format_double(r.test_accuracy);
            out << "," << r.status << "\n";
        }
        return out.str();
    }
};

// Trains and evaluates the benchmark variants under one budget and seed on a
// group-level 2/3 : 1/3 split of the dataset. A failure in one variant is
// reported in its row without aborting the others.
inline BenchTable bench_all(const Dataset& ds, const ModelConfig& base, const TrainConfig& tc,
                            std::uint64_t seed, std::size_t jobs = 1) {
    SplitResult sp = split(ds, 2.0 / 3.0, seed);
    BenchTable table;
    for (Variant v : {Variant::b1_frame, Variant::b4_temporal_image, Variant::b5_temporal_person,
                      Variant::b6_no_lstm1, Variant::b7_no_lstm2, Variant::two_stage}) {
        BenchRow row;
        row.variant = v;
        try {
            ModelConfig cfg = base;
            cfg.variant = v;
            cfg.feature_dim = ds.feature_dim;
            cfg.num_actions = ds.num_actions;
            cfg.num_activities = ds.num_activities;
            Model m = train_variant(cfg, sp.train.scenes, tc, seed);
            row.test_accuracy = evaluate(m, sp.test.scenes, jobs).accuracy;
        } catch (const Error& e) {
            row.status = std::string("error: ") + e.what();
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace hgr
