#pragma once

#include <optional>
#include <vector>

#include "gfra/access.hpp"

namespace gfra {

// Per-iteration record of an iterative solve.
struct SolveTrace {
    std::vector<Vec> estimates;
    std::vector<double> nmse_db_per_iter;  // filled when ground truth supplied
    int iterations_run = 0;
    double wall_clock_s = 0.0;
};

struct SolveResult {
    Vec estimate;
    SolveTrace trace;
};

// sign(u_i) * max(|u_i| - theta, 0), theta >= 0
Vec soft_threshold(const Vec& u, double theta);
void soft_threshold_inplace(Mat& u, double theta);

// Upper bound on the largest eigenvalue of A^T A (power iteration, 1.01 slack).
double lipschitz_upper(const PilotMatrix& pilots, int iters = 100);

SolveResult ista(const PilotMatrix& pilots, const Vec& y, double lambda, int max_iter,
                 double tol = 0.0, const Vec* x_true = nullptr);

SolveResult amp(const PilotMatrix& pilots, const Vec& y, double alpha, int max_iter,
                const Vec* x_true = nullptr);

// Batched solves over the columns of Y. When nmse_trace is non-null it
// receives one row per iteration with the batch NMSE in dB at that iterate.
Mat ista_batch(const PilotMatrix& pilots, const Mat& y, double lambda, int max_iter,
               const Mat* x_true = nullptr, std::vector<double>* nmse_trace = nullptr,
               std::vector<double>* seconds_cum = nullptr);
Mat amp_batch(const PilotMatrix& pilots, const Mat& y, double alpha, int max_iter,
              const Mat* x_true = nullptr, std::vector<double>* nmse_trace = nullptr,
              std::vector<double>* seconds_cum = nullptr);

// Estimate-only solves without per-iteration bookkeeping (timing paths).
Vec ista_point(const PilotMatrix& pilots, const Vec& y, double lambda, int max_iter,
               double lipschitz);
Vec amp_point(const PilotMatrix& pilots, const Vec& y, double alpha, int max_iter);

// Log-grid search minimizing batch NMSE on a validation batch.
double tune_lambda(const PilotMatrix& pilots, const Batch& val, int iters,
                   int grid_points = 20, double lo = 1e-3, double hi = 2.0);
double tune_alpha(const PilotMatrix& pilots, const Batch& val, int iters,
                  int grid_points = 20, double lo = 0.5, double hi = 3.0);

// 0.5 ||y - A x||^2 + lambda ||x||_1
double lasso_objective(const PilotMatrix& pilots, const Vec& y, const Vec& x, double lambda);

} // namespace gfra
