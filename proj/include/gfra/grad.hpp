#pragma once

#include <optional>
#include <string>

#include "gfra/nets.hpp"

namespace gfra {

enum class Loss { final_mse, per_layer_weighted_mse };

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    ParamSet first_moment;
    ParamSet second_moment;
    long step_count = 0;
    AdamHyper hyper;

    static AdamState init(const ParamSet& params, AdamHyper hyper = {});
};

// Bias-corrected Adam update, in place.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

struct BackwardResult {
    ParamSet grads;
    double loss = 0.0;
};

// Mean loss over the batch and its gradient w.r.t. every model parameter.
//
// final_mse: ||output - x_true||^2 averaged over the batch. per_layer_weighted_mse:
// for lista-h, each layer's squared error weighted by its halting weight (plus
// halt_penalty * (layers_used + leftover mass), the early-exit incentive); for the
// other architectures, the uniform mean of per-layer squared errors.
//
// Soft-threshold subgradient: 1 where |input| > theta, 0 inside the dead zone
// (|input| <= theta); d/dtheta = -sign(input) on live coordinates.
BackwardResult backward(const UnrolledModel& model, const Mat& y, const Mat& x_true,
                        const Mat* prior = nullptr, Loss loss = Loss::final_mse,
                        double halt_penalty = 0.0);

// Compare backward() to central finite differences on a random subsample of
// parameter coordinates. Coordinates whose perturbation flips any threshold
// mask or halting decision are skipped (the loss is non-smooth there).
double grad_check(const UnrolledModel& model, const Mat& y, const Mat& x_true,
                  const Mat* prior, Loss loss, double h, int n_coords, uint64_t seed,
                  std::string* worst_coord = nullptr);

} // namespace gfra
