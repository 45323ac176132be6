#pragma once

#include <string>
#include <vector>

#include "gfra/access.hpp"

namespace gfra {

// 10*log10( mean_b ||est_b - truth_b||^2 / ||truth_b||^2 ), columns are instances.
// The linear ratio is averaged over the batch before the dB conversion.
// Zero-norm truth columns are excluded; their count is reported via `excluded`.
// Exact recovery is floored at -300 dB.
double nmse_db(const Mat& estimates, const Mat& truths, int* excluded = nullptr);
double nmse_db(const Vec& estimate, const Vec& truth);

// detected = { i : |est_i| > tau };
// miss = |truth \ detected| / |truth|, false alarm = |detected \ truth| / (n - |truth|)
std::pair<double, double> detection_metrics(const Vec& estimate,
                                            const std::vector<int>& truth_support,
                                            double tau);

// Threshold equalizing miss and false-alarm rates on a validation batch.
double choose_tau(const Mat& estimates, const std::vector<std::vector<int>>& supports);

struct MetricRecord {
    std::string solver;
    int depth = 0;
    int iters = 0;
    int k = 0;            // fixed sparsity level, 0 when Bernoulli
    double p = 0.0;       // activation probability, 0 when fixed-K
    double snr_db = 0.0;
    double nmse_db = 0.0;
    double miss = 0.0;
    double fa = 0.0;
    double mean_layers = 0.0;
    double seconds = 0.0;
    int instances = 0;
    uint64_t seed = 0;
};

std::string metric_csv_header();
std::string metric_csv_row(const MetricRecord& r);
void write_metric_csv(const std::string& path, const std::vector<MetricRecord>& records);

// Companion plot-data file: x,y,series
struct PlotPoint {
    double x;
    double y;
    std::string series;
};
void write_plot_data(const std::string& path, const std::vector<PlotPoint>& points);

} // namespace gfra
