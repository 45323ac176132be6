#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "gfra/rng.hpp"

namespace gfra {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

// The m x n measurement matrix A: one column per user pilot.
struct PilotMatrix {
    Mat entries;        // m x n
    int m = 0;          // pilot length
    int n = 0;          // user count
    uint64_t seed = 0;
    bool normalized = false;
    Vec column_norm;    // cached per-column Euclidean norms
};

struct ActivitySpec {
    enum class Mode { bernoulli, fixed_k };
    Mode mode = Mode::bernoulli;
    double p = 0.1;  // activation probability (bernoulli mode)
    int k = 0;       // active-user count (fixed_k mode)

    static ActivitySpec bernoulli(double p) { return {Mode::bernoulli, p, 0}; }
    static ActivitySpec fixed_k(int k) { return {Mode::fixed_k, 0.0, k}; }
};

struct ChannelSpec {
    enum class Dist { gaussian };
    Dist dist = Dist::gaussian;  // standard normal coefficient per active user
};

// One access event.
struct AccessInstance {
    Vec x_true;                // activity indicator times channel coefficient
    Vec y;                     // received pilot signal, y = A x + noise
    std::vector<int> support;  // sorted active-user indices
    double snr_db = 0.0;
    double noise_sigma = 0.0;  // per-component noise standard deviation
};

// Column-wise batch of instances sharing one pilot matrix and SNR setting.
struct Batch {
    Mat x_true;  // n x B
    Mat y;       // m x B
    std::vector<std::vector<int>> supports;
    std::vector<double> noise_sigma;
    double snr_db = 0.0;
    uint64_t seed = 0;
};

PilotMatrix gen_pilot_matrix(int m, int n, uint64_t seed, bool normalize = true);

// sigma = sqrt(signal_power / 10^(snr_db/10)); snr_db = +inf means noiseless.
double awgn_sigma(double snr_db, double signal_power);

AccessInstance sample_instance(const PilotMatrix& pilots, const ActivitySpec& activity,
                               const ChannelSpec& channel, double snr_db, uint64_t seed);

Batch sample_batch(const PilotMatrix& pilots, const ActivitySpec& activity,
                   const ChannelSpec& channel, double snr_db, uint64_t seed, int count);

// Batch where instance i is drawn at sparsity levels[i % levels.size()].
Batch sample_batch_mixed(const PilotMatrix& pilots, const std::vector<int>& levels,
                         const ChannelSpec& channel, double snr_db, uint64_t seed, int count);

// Real-stacked representation of a complex linear system:
//   [Re(y); Im(y)] = [[Re(A), -Im(A)]; [Im(A), Re(A)]] [Re(x); Im(x)]
std::pair<Vec, Mat> complex_to_real_stacked(const CVec& y, const CMat& a);
Vec stack_complex(const CVec& v);

} // namespace gfra
