#include "gfra/access.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gfra {

PilotMatrix gen_pilot_matrix(int m, int n, uint64_t seed, bool normalize) {
    if (m <= 0 || n <= 0 || m >= n)
        throw std::invalid_argument("gen_pilot_matrix: need 0 < m < n");
    PilotMatrix pm;
    pm.m = m;
    pm.n = n;
    pm.seed = seed;
    pm.normalized = normalize;
    pm.entries.resize(m, n);
    Rng rng = Rng(seed).split(0x9170u);
    const double sd = 1.0 / std::sqrt(static_cast<double>(m));
    // column-major fill so the draw order is independent of storage tweaks
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i)
            pm.entries(i, j) = sd * rng.gaussian();
    if (normalize) {
        for (int j = 0; j < n; ++j) {
            double nrm = pm.entries.col(j).norm();
            pm.entries.col(j) /= nrm;
        }
    }
    pm.column_norm = pm.entries.colwise().norm();
    return pm;
}

double awgn_sigma(double snr_db, double signal_power) {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    if (!(signal_power > 0.0))
        throw std::domain_error("awgn_sigma: signal_power must be positive");
    return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
}

namespace {

std::vector<int> draw_support(const ActivitySpec& activity, int n, Rng& rng) {
    if (activity.mode == ActivitySpec::Mode::fixed_k) {
        if (activity.k <= 0 || activity.k >= n)
            throw std::invalid_argument("ActivitySpec: need 0 < k < n");
        // Fisher-Yates partial shuffle
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < activity.k; ++i) {
            int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(n - i)));
            std::swap(idx[i], idx[j]);
        }
        std::vector<int> support(idx.begin(), idx.begin() + activity.k);
        std::sort(support.begin(), support.end());
        return support;
    }
    if (!(activity.p > 0.0 && activity.p < 1.0))
        throw std::invalid_argument("ActivitySpec: need 0 < p < 1");
    // resample in the (rare) all-inactive case; NMSE needs a nonzero truth
    for (;;) {
        std::vector<int> support;
        for (int i = 0; i < n; ++i)
            if (rng.uniform() < activity.p) support.push_back(i);
        if (!support.empty()) return support;
    }
}

AccessInstance sample_one(const PilotMatrix& pilots, const std::vector<int>& support,
                          const ChannelSpec&, double snr_db, Rng& rng) {
    AccessInstance inst;
    inst.snr_db = snr_db;
    inst.support = support;
    inst.x_true = Vec::Zero(pilots.n);
    for (int idx : support) inst.x_true(idx) = rng.gaussian();
    Vec clean = pilots.entries * inst.x_true;
    // SNR defined per received component; power taken from the realized signal
    const double power = clean.squaredNorm() / pilots.m;
    inst.noise_sigma = awgn_sigma(snr_db, power > 0 ? power : 1.0);
    inst.y = clean;
    if (inst.noise_sigma > 0)
        for (int i = 0; i < pilots.m; ++i) inst.y(i) += inst.noise_sigma * rng.gaussian();
    return inst;
}

} // namespace

AccessInstance sample_instance(const PilotMatrix& pilots, const ActivitySpec& activity,
                               const ChannelSpec& channel, double snr_db, uint64_t seed) {
    Rng rng(seed);
    auto support = draw_support(activity, pilots.n, rng);
    return sample_one(pilots, support, channel, snr_db, rng);
}

Batch sample_batch(const PilotMatrix& pilots, const ActivitySpec& activity,
                   const ChannelSpec& channel, double snr_db, uint64_t seed, int count) {
    if (count <= 0) throw std::invalid_argument("sample_batch: count must be positive");
    Batch b;
    b.snr_db = snr_db;
    b.seed = seed;
    b.x_true.resize(pilots.n, count);
    b.y.resize(pilots.m, count);
    b.supports.resize(count);
    b.noise_sigma.resize(count);
    Rng root(seed);
    for (int i = 0; i < count; ++i) {
        Rng sub = root.split(static_cast<uint64_t>(i));
        auto support = draw_support(activity, pilots.n, sub);
        AccessInstance inst = sample_one(pilots, support, channel, snr_db, sub);
        b.x_true.col(i) = inst.x_true;
        b.y.col(i) = inst.y;
        b.supports[i] = std::move(inst.support);
        b.noise_sigma[i] = inst.noise_sigma;
    }
    return b;
}

Batch sample_batch_mixed(const PilotMatrix& pilots, const std::vector<int>& levels,
                         const ChannelSpec& channel, double snr_db, uint64_t seed, int count) {
    if (levels.empty()) throw std::invalid_argument("sample_batch_mixed: empty level list");
    Batch b;
    b.snr_db = snr_db;
    b.seed = seed;
    b.x_true.resize(pilots.n, count);
    b.y.resize(pilots.m, count);
    b.supports.resize(count);
    b.noise_sigma.resize(count);
    Rng root(seed);
    for (int i = 0; i < count; ++i) {
        Rng sub = root.split(static_cast<uint64_t>(i));
        auto act = ActivitySpec::fixed_k(levels[i % levels.size()]);
        auto support = draw_support(act, pilots.n, sub);
        AccessInstance inst = sample_one(pilots, support, channel, snr_db, sub);
        b.x_true.col(i) = inst.x_true;
        b.y.col(i) = inst.y;
        b.supports[i] = std::move(inst.support);
        b.noise_sigma[i] = inst.noise_sigma;
    }
    return b;
}

Vec stack_complex(const CVec& v) {
    Vec out(2 * v.size());
    out.head(v.size()) = v.real();
    out.tail(v.size()) = v.imag();
    return out;
}

std::pair<Vec, Mat> complex_to_real_stacked(const CVec& y, const CMat& a) {
    if (y.size() != a.rows())
        throw std::invalid_argument("complex_to_real_stacked: y length must equal rows of A");
    if (!y.allFinite() || !a.allFinite())
        throw std::invalid_argument("complex_to_real_stacked: non-finite input");
    const auto m = a.rows(), n = a.cols();
    Mat stacked(2 * m, 2 * n);
    stacked.topLeftCorner(m, n) = a.real();
    stacked.topRightCorner(m, n) = -a.imag();
    stacked.bottomLeftCorner(m, n) = a.imag();
    stacked.bottomRightCorner(m, n) = a.real();
    return {stack_complex(y), stacked};
}

} // namespace gfra
