#include "gfra/solvers.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "gfra/metrics.hpp"

namespace gfra {

namespace {
using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}
} // namespace

Vec soft_threshold(const Vec& u, double theta) {
    if (theta < 0) throw std::domain_error("soft_threshold: theta must be nonnegative");
    return u.array().sign() * (u.array().abs() - theta).max(0.0);
}

void soft_threshold_inplace(Mat& u, double theta) {
    if (theta < 0) throw std::domain_error("soft_threshold: theta must be nonnegative");
    u = u.array().sign() * (u.array().abs() - theta).max(0.0);
}

double lipschitz_upper(const PilotMatrix& pilots, int iters) {
    // power iteration on A^T A with a deterministic start vector
    Vec v = Vec::Ones(pilots.n).normalized();
    double lam = 0;
    for (int i = 0; i < iters; ++i) {
        Vec w = pilots.entries.transpose() * (pilots.entries * v);
        lam = w.norm();
        if (lam == 0) break;
        v = w / lam;
    }
    return 1.01 * lam;
}

double lasso_objective(const PilotMatrix& pilots, const Vec& y, const Vec& x, double lambda) {
    return 0.5 * (y - pilots.entries * x).squaredNorm() + lambda * x.lpNorm<1>();
}

SolveResult ista(const PilotMatrix& pilots, const Vec& y, double lambda, int max_iter,
                 double tol, const Vec* x_true) {
    if (lambda <= 0) throw std::domain_error("ista: lambda must be positive");
    if (y.size() != pilots.m) throw std::invalid_argument("ista: y length mismatch");
    const auto t0 = Clock::now();
    const double L = lipschitz_upper(pilots);
    const double step = 1.0 / L;
    const double thr = lambda / L;
    Vec x = Vec::Zero(pilots.n);
    SolveTrace trace;
    for (int it = 0; it < max_iter; ++it) {
        Vec r = y - pilots.entries * x;
        Vec next = soft_threshold(x + step * (pilots.entries.transpose() * r), thr);
        if (!next.allFinite()) throw std::runtime_error("ista: divergence (non-finite iterate)");
        const double delta = (next - x).norm() / std::max(x.norm(), 1.0);
        x = std::move(next);
        trace.estimates.push_back(x);
        if (x_true) trace.nmse_db_per_iter.push_back(nmse_db(x, *x_true));
        ++trace.iterations_run;
        if (tol > 0 && delta < tol) break;
    }
    trace.wall_clock_s = seconds_since(t0);
    return {x, std::move(trace)};
}

SolveResult amp(const PilotMatrix& pilots, const Vec& y, double alpha, int max_iter,
                const Vec* x_true) {
    if (alpha <= 0) throw std::domain_error("amp: alpha must be positive");
    if (y.size() != pilots.m) throw std::invalid_argument("amp: y length mismatch");
    const auto t0 = Clock::now();
    const double m = pilots.m;
    const double sqrt_m = std::sqrt(m);
    const double v0 = std::max(y.norm(), 1e-300);
    Vec x = Vec::Zero(pilots.n);
    Vec v = Vec::Zero(pilots.m);
    SolveTrace trace;
    for (int it = 0; it < max_iter; ++it) {
        const double nnz = static_cast<double>((x.array() != 0.0).count());
        v = y - pilots.entries * x + (nnz / m) * v;
        if (v.norm() > 1e6 * v0)
            throw std::runtime_error("amp: divergence (residual norm blew up)");
        const double theta = alpha * v.norm() / sqrt_m;
        x = soft_threshold(x + pilots.entries.transpose() * v, theta);
        trace.estimates.push_back(x);
        if (x_true) trace.nmse_db_per_iter.push_back(nmse_db(x, *x_true));
        ++trace.iterations_run;
    }
    trace.wall_clock_s = seconds_since(t0);
    return {x, std::move(trace)};
}

Mat ista_batch(const PilotMatrix& pilots, const Mat& y, double lambda, int max_iter,
               const Mat* x_true, std::vector<double>* nmse_trace,
               std::vector<double>* seconds_cum) {
    if (lambda <= 0) throw std::domain_error("ista_batch: lambda must be positive");
    const auto t0 = Clock::now();
    const double L = lipschitz_upper(pilots);
    const double thr = lambda / L;
    const Mat w = Mat::Identity(pilots.n, pilots.n) -
                  (pilots.entries.transpose() * pilots.entries) / L;
    const Mat b = (pilots.entries.transpose() * y) / L;
    Mat x = Mat::Zero(pilots.n, y.cols());
    for (int it = 0; it < max_iter; ++it) {
        x = w * x + b;
        soft_threshold_inplace(x, thr);
        if (seconds_cum) seconds_cum->push_back(seconds_since(t0));
        if (x_true && nmse_trace) nmse_trace->push_back(nmse_db(x, *x_true));
    }
    return x;
}

Mat amp_batch(const PilotMatrix& pilots, const Mat& y, double alpha, int max_iter,
              const Mat* x_true, std::vector<double>* nmse_trace,
              std::vector<double>* seconds_cum) {
    const auto t0 = Clock::now();
    if (alpha <= 0) throw std::domain_error("amp_batch: alpha must be positive");
    const double m = pilots.m;
    const double sqrt_m = std::sqrt(m);
    const auto cols = y.cols();
    Mat x = Mat::Zero(pilots.n, cols);
    Mat v = Mat::Zero(pilots.m, cols);
    for (int it = 0; it < max_iter; ++it) {
        Vec nnz(cols);
        for (Eigen::Index b = 0; b < cols; ++b)
            nnz(b) = static_cast<double>((x.col(b).array() != 0.0).count());
        v = y - pilots.entries * x + v * (nnz / m).asDiagonal();
        Mat r = x + pilots.entries.transpose() * v;
        for (Eigen::Index b = 0; b < cols; ++b) {
            const double theta = alpha * v.col(b).norm() / sqrt_m;
            x.col(b) = r.col(b).array().sign() * (r.col(b).array().abs() - theta).max(0.0);
        }
        if (seconds_cum) seconds_cum->push_back(seconds_since(t0));
        if (x_true && nmse_trace) nmse_trace->push_back(nmse_db(x, *x_true));
    }
    return x;
}

Vec ista_point(const PilotMatrix& pilots, const Vec& y, double lambda, int max_iter,
               double lipschitz) {
    const double step = 1.0 / lipschitz;
    const double thr = lambda / lipschitz;
    Vec x = Vec::Zero(pilots.n);
    for (int it = 0; it < max_iter; ++it) {
        Vec u = x + step * (pilots.entries.transpose() * (y - pilots.entries * x));
        x = u.array().sign() * (u.array().abs() - thr).max(0.0);
    }
    return x;
}

Vec amp_point(const PilotMatrix& pilots, const Vec& y, double alpha, int max_iter) {
    const double m = pilots.m;
    const double sqrt_m = std::sqrt(m);
    Vec x = Vec::Zero(pilots.n);
    Vec v = Vec::Zero(pilots.m);
    for (int it = 0; it < max_iter; ++it) {
        const double nnz = static_cast<double>((x.array() != 0.0).count());
        v = y - pilots.entries * x + (nnz / m) * v;
        const double theta = alpha * v.norm() / sqrt_m;
        Vec u = x + pilots.entries.transpose() * v;
        x = u.array().sign() * (u.array().abs() - theta).max(0.0);
    }
    return x;
}

namespace {

template <typename Eval>
double grid_search(int grid_points, double lo, double hi, Eval eval) {
    if (grid_points < 2 || lo <= 0 || hi <= lo)
        throw std::invalid_argument("grid_search: bad grid");
    double best_param = lo, best_nmse = 1e300;
    for (int i = 0; i < grid_points; ++i) {
        const double t = static_cast<double>(i) / (grid_points - 1);
        const double param = lo * std::pow(hi / lo, t);
        double val;
        try {
            val = eval(param);
        } catch (const std::runtime_error&) {
            continue;  // diverged at this setting
        }
        if (val < best_nmse) {
            best_nmse = val;
            best_param = param;
        }
    }
    return best_param;
}

} // namespace

double tune_lambda(const PilotMatrix& pilots, const Batch& val, int iters, int grid_points,
                   double lo, double hi) {
    return grid_search(grid_points, lo, hi, [&](double lambda) {
        Mat est = ista_batch(pilots, val.y, lambda, iters);
        return nmse_db(est, val.x_true);
    });
}

double tune_alpha(const PilotMatrix& pilots, const Batch& val, int iters, int grid_points,
                  double lo, double hi) {
    return grid_search(grid_points, lo, hi, [&](double alpha) {
        Mat est = amp_batch(pilots, val.y, alpha, iters);
        return nmse_db(est, val.x_true);
    });
}

} // namespace gfra
