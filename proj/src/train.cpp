#include "gfra/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gfra/metrics.hpp"
#include "gfra/rng.hpp"

namespace gfra {

using nlohmann::json;

void TrainConfig::validate(int n) const {
    if (train_size <= 0 || val_size <= 0 || batch_size <= 0)
        throw std::invalid_argument("TrainConfig: sizes must be positive");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be nonnegative");
    if (regime == Regime::mixed_k) {
        if (mixed.empty()) throw std::invalid_argument("TrainConfig: empty mixed_k list");
        for (int k : mixed)
            if (k <= 0 || k >= n)
                throw std::invalid_argument("TrainConfig: mixed_k level out of range");
    }
    if (regime == Regime::fixed_k && (k <= 0 || k >= n))
        throw std::invalid_argument("TrainConfig: k out of range");
    if (regime == Regime::bernoulli_p && !(p > 0 && p < 1))
        throw std::invalid_argument("TrainConfig: p out of range");
}

namespace {

std::string regime_name(TrainConfig::Regime r) {
    switch (r) {
        case TrainConfig::Regime::bernoulli_p: return "bern";
        case TrainConfig::Regime::fixed_k: return "fixed";
        case TrainConfig::Regime::mixed_k: return "mixed";
    }
    throw std::logic_error("regime_name: bad enum");
}

TrainConfig::Regime regime_from_name(const std::string& s) {
    if (s == "bern") return TrainConfig::Regime::bernoulli_p;
    if (s == "fixed") return TrainConfig::Regime::fixed_k;
    if (s == "mixed") return TrainConfig::Regime::mixed_k;
    throw std::invalid_argument("unknown regime: " + s);
}

} // namespace

std::string to_json(const TrainConfig& cfg) {
    json j;
    j["regime"] = regime_name(cfg.regime);
    j["p"] = cfg.p;
    j["k"] = cfg.k;
    j["mixed"] = cfg.mixed;
    j["train_size"] = cfg.train_size;
    j["val_size"] = cfg.val_size;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["patience"] = cfg.patience;
    j["lr"] = cfg.adam.lr;
    j["beta1"] = cfg.adam.beta1;
    j["beta2"] = cfg.adam.beta2;
    j["eps"] = cfg.adam.eps;
    j["loss"] = cfg.loss == Loss::final_mse ? "final_mse" : "per_layer_weighted_mse";
    j["seed"] = cfg.seed;
    j["snr_db"] = cfg.snr_db;
    j["halt_penalty"] = cfg.halt_penalty;
    j["reveal_fraction"] = cfg.reveal_fraction;
    j["curriculum"] = cfg.curriculum;
    j["curriculum_epochs"] = cfg.curriculum_epochs;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("train config: ") + e.what());
    }
    TrainConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "regime")
            cfg.regime = regime_from_name(it.value().get<std::string>());
        else if (k == "p")
            cfg.p = it.value().get<double>();
        else if (k == "k")
            cfg.k = it.value().get<int>();
        else if (k == "mixed")
            cfg.mixed = it.value().get<std::vector<int>>();
        else if (k == "train_size")
            cfg.train_size = it.value().get<int>();
        else if (k == "val_size")
            cfg.val_size = it.value().get<int>();
        else if (k == "batch_size")
            cfg.batch_size = it.value().get<int>();
        else if (k == "epochs")
            cfg.epochs = it.value().get<int>();
        else if (k == "patience")
            cfg.patience = it.value().get<int>();
        else if (k == "lr")
            cfg.adam.lr = it.value().get<double>();
        else if (k == "beta1")
            cfg.adam.beta1 = it.value().get<double>();
        else if (k == "beta2")
            cfg.adam.beta2 = it.value().get<double>();
        else if (k == "eps")
            cfg.adam.eps = it.value().get<double>();
        else if (k == "loss") {
            const auto s = it.value().get<std::string>();
            if (s == "final_mse")
                cfg.loss = Loss::final_mse;
            else if (s == "per_layer_weighted_mse")
                cfg.loss = Loss::per_layer_weighted_mse;
            else
                throw std::invalid_argument("unknown loss: " + s);
        } else if (k == "seed")
            cfg.seed = it.value().get<uint64_t>();
        else if (k == "snr_db")
            cfg.snr_db = it.value().get<double>();
        else if (k == "halt_penalty")
            cfg.halt_penalty = it.value().get<double>();
        else if (k == "reveal_fraction")
            cfg.reveal_fraction = it.value().get<double>();
        else if (k == "curriculum")
            cfg.curriculum = it.value().get<bool>();
        else if (k == "curriculum_epochs")
            cfg.curriculum_epochs = it.value().get<int>();
        else
            throw std::invalid_argument("unknown config key: " + k);
    }
    return cfg;
}

std::pair<Batch, Batch> build_dataset(const PilotMatrix& pilots, const TrainConfig& cfg) {
    cfg.validate(pilots.n);
    const uint64_t train_seed = Rng(cfg.seed).split(1).seed();
    const uint64_t val_seed = Rng(cfg.seed).split(2).seed();
    ChannelSpec channel;
    auto draw = [&](uint64_t seed, int count) {
        switch (cfg.regime) {
            case TrainConfig::Regime::bernoulli_p:
                return sample_batch(pilots, ActivitySpec::bernoulli(cfg.p), channel, cfg.snr_db,
                                    seed, count);
            case TrainConfig::Regime::fixed_k:
                return sample_batch(pilots, ActivitySpec::fixed_k(cfg.k), channel, cfg.snr_db,
                                    seed, count);
            case TrainConfig::Regime::mixed_k:
                return sample_batch_mixed(pilots, cfg.mixed, channel, cfg.snr_db, seed, count);
        }
        throw std::logic_error("build_dataset: bad regime");
    };
    return {draw(train_seed, cfg.train_size), draw(val_seed, cfg.val_size)};
}

double validation_nmse(const UnrolledModel& model, const Batch& batch, double reveal_fraction,
                       uint64_t prior_seed) {
    if (model.arch == Arch::lista_p) {
        Mat prior = make_prior_batch(batch.supports, reveal_fraction, prior_seed, model.n);
        return nmse_db(forward_batch(model, batch.y, &prior).output, batch.x_true);
    }
    return nmse_db(forward_batch(model, batch.y).output, batch.x_true);
}

namespace {

void clamp_thresholds(UnrolledModel& model) {
    for (auto& [name, t] : model.params.tensors)
        if (name.rfind("theta.", 0) == 0 || name.rfind("alpha.", 0) == 0)
            t = t.cwiseMax(0.0);
}

// One pass over the training set. only_layer >= 0 restricts updates to that
// layer's parameters (curriculum stages).
void run_epoch(UnrolledModel& model, AdamState& adam, const Batch& train_set, const Mat* prior,
               const TrainConfig& cfg, Rng& shuffle_rng, int only_layer) {
    const auto total = static_cast<int>(train_set.y.cols());
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    for (int i = total - 1; i > 0; --i) {
        int j = static_cast<int>(shuffle_rng.below(static_cast<uint64_t>(i + 1)));
        std::swap(order[i], order[j]);
    }
    const std::string only_suffix =
        only_layer >= 0 ? "." + std::to_string(only_layer) : std::string();
    for (int start = 0; start < total; start += cfg.batch_size) {
        const int bs = std::min(cfg.batch_size, total - start);
        Mat y(model.m, bs), x(model.n, bs);
        Mat pb;
        if (prior) pb.resize(model.n, bs);
        for (int i = 0; i < bs; ++i) {
            const int idx = order[start + i];
            y.col(i) = train_set.y.col(idx);
            x.col(i) = train_set.x_true.col(idx);
            if (prior) pb.col(i) = prior->col(idx);
        }
        BackwardResult bw = backward(model, y, x, prior ? &pb : nullptr, cfg.loss,
                                     cfg.halt_penalty);
        if (!std::isfinite(bw.loss)) throw std::runtime_error("train: NaN loss");
        if (only_layer >= 0) {
            for (auto& [name, g] : bw.grads.tensors) {
                const auto dot = name.rfind('.');
                if (name.substr(dot) != only_suffix) g.setZero();
            }
        }
        adam_step(model.params, bw.grads, adam);
        clamp_thresholds(model);
    }
}

} // namespace

TrainReport train(UnrolledModel& model, const PilotMatrix& pilots, const Batch& train_set,
                  const Batch& val_set, const TrainConfig& cfg) {
    cfg.validate(pilots.n);
    require_pilot_match(model, pilots);
    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;

    const uint64_t prior_seed_train = Rng(cfg.seed).split(3).seed();
    const uint64_t prior_seed_val = Rng(cfg.seed).split(4).seed();
    Mat train_prior;
    const Mat* prior_ptr = nullptr;
    if (model.arch == Arch::lista_p) {
        train_prior = make_prior_batch(train_set.supports, cfg.reveal_fraction,
                                       prior_seed_train, model.n);
        prior_ptr = &train_prior;
    }

    auto val_score = [&] {
        return validation_nmse(model, val_set, cfg.reveal_fraction, prior_seed_val);
    };

    report.init_val_nmse_db = val_score();
    ParamSet best = model.params;
    double best_nmse = report.init_val_nmse_db;
    Rng shuffle_rng = Rng(cfg.seed).split(5);
    AdamState adam = AdamState::init(model.params, cfg.adam);

    try {
        if (cfg.curriculum) {
            // progressive depth: stage d trains layer d-1 on the depth-d prefix,
            // earlier layers frozen; the main loop below fine-tunes end to end
            for (int d = 1; d <= model.depth; ++d) {
                UnrolledModel sub = model;
                sub.depth = d;
                ParamSet kept;
                for (const auto& [name, t] : model.params.tensors) {
                    const int layer = std::stoi(name.substr(name.rfind('.') + 1));
                    if (layer < d) kept.tensors[name] = t;
                }
                sub.params = std::move(kept);
                AdamState stage_adam = AdamState::init(sub.params, cfg.adam);
                for (int e = 0; e < cfg.curriculum_epochs; ++e)
                    run_epoch(sub, stage_adam, train_set, prior_ptr, cfg, shuffle_rng, d - 1);
                for (auto& [name, t] : sub.params.tensors)
                    model.params.at(name) = t;
            }
            adam = AdamState::init(model.params, cfg.adam);
            const double nmse = val_score();
            if (nmse < best_nmse) {
                best_nmse = nmse;
                best = model.params;
            }
        }
        int since_best = 0;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            run_epoch(model, adam, train_set, prior_ptr, cfg, shuffle_rng, -1);
            const double nmse = val_score();
            report.val_nmse_db.push_back(nmse);
            ++report.epochs_run;
            if (nmse < best_nmse) {
                best_nmse = nmse;
                best = model.params;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    } catch (const std::runtime_error& e) {
        report.diagnostic = e.what();
    }

    model.params = best;  // never return something worse than the initialization
    report.best_val_nmse_db = best_nmse;
    report.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

} // namespace gfra
