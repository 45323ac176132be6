#pragma once

#include <string>
#include <vector>

#include "gfra/grad.hpp"

namespace gfra {

struct TrainConfig {
    enum class Regime { bernoulli_p, fixed_k, mixed_k };
    Regime regime = Regime::bernoulli_p;
    double p = 0.1;
    int k = 30;
    std::vector<int> mixed;          // sparsity levels, cycled uniformly
    int train_size = 100000;
    int val_size = 5000;
    int batch_size = 128;
    int epochs = 500;
    int patience = 20;               // consecutive non-improving validation epochs
    AdamHyper adam;
    Loss loss = Loss::final_mse;
    uint64_t seed = 1;
    double snr_db = 20.0;
    double halt_penalty = 0.01;      // lista-h early-exit incentive
    double reveal_fraction = 0.5;    // lista-p prior
    bool curriculum = false;         // layer-by-layer pre-training pass
    int curriculum_epochs = 1;       // epochs per curriculum stage

    void validate(int n) const;
};

std::string to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& json_text);

struct TrainReport {
    std::vector<double> val_nmse_db;  // one entry per epoch run
    double init_val_nmse_db = 0.0;
    double best_val_nmse_db = 0.0;
    double wall_clock_s = 0.0;
    int epochs_run = 0;
    std::string diagnostic;           // non-empty when training aborted early
};

// Train/validation instance sets with disjoint sub-seeds.
std::pair<Batch, Batch> build_dataset(const PilotMatrix& pilots, const TrainConfig& cfg);

// Mini-batch Adam on the model, in place; the best-validation parameters are
// restored before returning. Deterministic given cfg.seed.
TrainReport train(UnrolledModel& model, const PilotMatrix& pilots, const Batch& train_set,
                  const Batch& val_set, const TrainConfig& cfg);

// Validation NMSE of a model on a batch (builds lista-p priors as configured).
double validation_nmse(const UnrolledModel& model, const Batch& batch, double reveal_fraction,
                       uint64_t prior_seed);

} // namespace gfra
