#pragma once

#include <map>
#include <string>
#include <vector>

#include "gfra/access.hpp"

namespace gfra {

enum class Arch { lista, lamp, lista_p, lista_h };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);

// Named learnable tensors. Vectors are stored n x 1, scalars 1 x 1.
struct ParamSet {
    std::map<std::string, Mat> tensors;

    Mat& at(const std::string& name);
    const Mat& at(const std::string& name) const;
    ParamSet zeros_like() const;
    bool same_shapes(const ParamSet& other) const;
    bool all_finite() const;
};

struct UnrolledModel {
    Arch arch = Arch::lista;
    int m = 0, n = 0, depth = 0;
    ParamSet params;
    Mat pilot;                 // copy of the pilot entries the model is bound to
    uint64_t pilot_seed = 0;
    bool pilot_normalized = true;
    double epsilon_halt = 0.01;  // lista_h stop slack
    int halt_feat_dim = 0;       // lista_h feature dimension

    int param_count() const;
};

struct ForwardResult {
    Vec estimate;
    std::vector<Vec> per_layer_estimates;
    int layers_used = 0;
    std::vector<double> halting_weights;  // lista_h only, else empty
};

// Batched forward pass with everything backward() needs retained.
struct ForwardCache {
    std::vector<Mat> x;     // x[0]=0 .. x[depth], n x B each
    std::vector<Mat> pre;   // per-layer pre-activations
    std::vector<Mat> v;     // lamp: residuals per layer, m x B
    std::vector<Vec> vnorm; // lamp: per-instance residual norms
    std::vector<Vec> nnz;   // lamp: per-instance nonzero counts fed to the Onsager term
    std::vector<Mat> feat;  // lista_h: per-layer features, d x B
    Mat scores;             // lista_h: depth x B raw halting scores
    Mat weights;            // lista_h: depth x B halting weights (zero past the halt layer)
    std::vector<int> layers_used;  // per instance
    Mat output;             // n x B
    uint64_t mask_sig = 0;  // hash over threshold masks and halting decisions
};

ForwardCache forward_batch(const UnrolledModel& model, const Mat& y,
                           const Mat* prior = nullptr);

// ISTA-equivalent start: W1 = beta A^T, W2 = I - beta A^T A, theta = theta0.
// beta <= 0 selects 1/L with L the power-iteration Lipschitz bound.
UnrolledModel init_lista(const PilotMatrix& pilots, int depth, double beta, double theta0);
UnrolledModel init_listap(const PilotMatrix& pilots, int depth, double beta, double theta0);
// AMP-equivalent start: B_t = A^T, alpha_t = 1.
UnrolledModel init_lamp(const PilotMatrix& pilots, int depth, double alpha0 = 1.0);
UnrolledModel init_listah(const PilotMatrix& pilots, int depth, double beta, double theta0,
                          int feat_dim, double epsilon_halt, uint64_t seed);

ForwardResult lista_forward(const UnrolledModel& model, const Vec& y);
ForwardResult lamp_forward(const UnrolledModel& model, const Vec& y);
ForwardResult listap_forward(const UnrolledModel& model, const Vec& y, const Vec& prior);
// Stops computing layers once the cumulative score reaches 1 - epsilon_halt.
ForwardResult listah_forward(const UnrolledModel& model, const Vec& y);

// Checking-oracle prior: a random ceil(reveal_fraction * |support|)-subset of the
// true support marked 1, everything else 0.
Vec make_prior(const std::vector<int>& support, double reveal_fraction, uint64_t seed, int n);
Mat make_prior_batch(const std::vector<std::vector<int>>& supports, double reveal_fraction,
                     uint64_t seed, int n);

// Checkpoint container:
//   "UNET" | version u32 | arch u32 | m u32 | n u32 | depth u32 | pilot seed u64
//   | block count u32 | blocks: name len u32 + name + rows u32 + cols u32 + f64 row-major
void save_checkpoint(const UnrolledModel& model, const std::string& path);
UnrolledModel load_checkpoint(const std::string& path);

// Throws when the model was trained against a different pilot matrix.
void require_pilot_match(const UnrolledModel& model, const PilotMatrix& pilots);

} // namespace gfra
