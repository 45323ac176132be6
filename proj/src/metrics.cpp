#include "gfra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gfra {

double nmse_db(const Mat& estimates, const Mat& truths, int* excluded) {
    if (estimates.rows() != truths.rows() || estimates.cols() != truths.cols())
        throw std::invalid_argument("nmse_db: shape mismatch");
    if (estimates.cols() == 0) throw std::invalid_argument("nmse_db: empty batch");
    double sum_ratio = 0.0;
    int used = 0, skipped = 0;
    for (Eigen::Index b = 0; b < truths.cols(); ++b) {
        const double denom = truths.col(b).squaredNorm();
        if (denom == 0.0) {
            ++skipped;
            continue;
        }
        sum_ratio += (estimates.col(b) - truths.col(b)).squaredNorm() / denom;
        ++used;
    }
    if (excluded) *excluded = skipped;
    if (used == 0) throw std::invalid_argument("nmse_db: all truths have zero norm");
    const double mean_ratio = sum_ratio / used;
    if (mean_ratio <= 1e-30) return -300.0;
    return std::max(10.0 * std::log10(mean_ratio), -300.0);
}

double nmse_db(const Vec& estimate, const Vec& truth) {
    Mat e = estimate, t = truth;
    return nmse_db(e, t);
}

std::pair<double, double> detection_metrics(const Vec& estimate,
                                            const std::vector<int>& truth_support,
                                            double tau) {
    if (!(tau > 0)) throw std::invalid_argument("detection_metrics: tau must be positive");
    const auto n = estimate.size();
    std::vector<char> truth(n, 0);
    for (int idx : truth_support) truth[idx] = 1;
    int missed = 0, false_alarms = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool detected = std::abs(estimate(i)) > tau;
        if (truth[i] && !detected) ++missed;
        if (!truth[i] && detected) ++false_alarms;
    }
    const auto t = static_cast<double>(truth_support.size());
    double miss = t > 0 ? missed / t : 0.0;
    double fa = n > static_cast<Eigen::Index>(truth_support.size())
                    ? false_alarms / static_cast<double>(n - truth_support.size())
                    : 0.0;
    return {miss, fa};
}

double choose_tau(const Mat& estimates, const std::vector<std::vector<int>>& supports) {
    // bisect on tau: miss is non-decreasing, false alarm non-increasing
    double lo = 1e-6, hi = estimates.cwiseAbs().maxCoeff() + 1e-6;
    auto rates = [&](double tau) {
        double miss = 0, fa = 0;
        for (Eigen::Index b = 0; b < estimates.cols(); ++b) {
            auto [m, f] = detection_metrics(estimates.col(b), supports[b], tau);
            miss += m;
            fa += f;
        }
        const auto cnt = static_cast<double>(estimates.cols());
        return std::make_pair(miss / cnt, fa / cnt);
    };
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        auto [miss, fa] = rates(mid);
        if (miss < fa)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {
std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}
} // namespace

std::string metric_csv_header() {
    return "solver,depth,iters,k,p,snr_db,nmse_db,miss,fa,mean_layers,seconds,instances,seed";
}

std::string metric_csv_row(const MetricRecord& r) {
    std::ostringstream os;
    os << r.solver << ',' << r.depth << ',' << r.iters << ',' << r.k << ',' << fmt(r.p) << ','
       << fmt(r.snr_db) << ',' << fmt(r.nmse_db) << ',' << fmt(r.miss) << ',' << fmt(r.fa) << ','
       << fmt(r.mean_layers) << ',' << fmt(r.seconds) << ',' << r.instances << ',' << r.seed;
    return os.str();
}

void write_metric_csv(const std::string& path, const std::vector<MetricRecord>& records) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_metric_csv: cannot open " + path);
    os << metric_csv_header() << '\n';
    for (const auto& r : records) os << metric_csv_row(r) << '\n';
}

void write_plot_data(const std::string& path, const std::vector<PlotPoint>& points) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_plot_data: cannot open " + path);
    os << "x,y,series\n";
    for (const auto& p : points) os << fmt(p.x) << ',' << fmt(p.y) << ',' << p.series << '\n';
}

} // namespace gfra
