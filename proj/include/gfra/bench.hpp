#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gfra/metrics.hpp"
#include "gfra/nets.hpp"
#include "gfra/solvers.hpp"

namespace gfra {

struct BenchConfig {
    int m = 250;
    int n = 500;
    uint64_t pilot_seed = 7;
    double p = 0.1;            // Bernoulli activation for the convergence run
    double snr_db = 20.0;
    int test_size = 2000;
    uint64_t seed = 99;        // test/validation data seed
    int ista_iters = 1000;
    int amp_iters = 30;
    double lambda = 0.0;       // <= 0 means tune on a validation batch
    double alpha = 0.0;        // <= 0 means tune on a validation batch
    int tune_size = 200;
    std::vector<int> levels = {10, 20, 30, 40, 50};
    double reveal_fraction = 0.5;
};

// NMSE vs iterations (ISTA, AMP) and vs layers (LISTA per-layer, LAMP per-layer,
// LISTA-H at its mean used depth) on a shared test set.
struct ConvergenceResult {
    std::vector<MetricRecord> records;
    std::vector<PlotPoint> plot;
    double tuned_lambda = 0.0;
    double tuned_alpha = 0.0;
};
ConvergenceResult run_convergence(const BenchConfig& cfg, const std::string& lista_path,
                                  const std::string& lamp_path,
                                  const std::string& listah_path);

// NMSE per sparsity level for each named checkpoint; fixed-K test sets.
struct SweepModel {
    std::string tag;   // CSV solver column
    std::string path;  // checkpoint
    int at_level = 0;  // > 0: evaluate only at this level (per-level specialists)
};
struct SweepResult {
    std::vector<MetricRecord> records;
    std::vector<PlotPoint> plot;
};
SweepResult run_sparsity_sweep(const BenchConfig& cfg, const std::vector<SweepModel>& models);

struct SolverSpec {
    enum class Kind { ista, amp, net };
    Kind kind = Kind::ista;
    double lambda = 0.1;
    double alpha = 1.4;
    int iters = 0;                       // ista/amp iteration count
    const UnrolledModel* model = nullptr;
};

struct TimingStats {
    double median_s = 0.0;
    double iqr_s = 0.0;
    std::vector<double> runs_s;
};

// Wall clock over full passes of the test set, single-threaded; one warm-up
// pass is excluded.
TimingStats time_solver(const SolverSpec& spec, const PilotMatrix& pilots, const Mat& y,
                        int repetitions);

} // namespace gfra
