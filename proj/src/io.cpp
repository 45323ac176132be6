#include "gfra/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gfra {

namespace {

constexpr uint32_t kBatchVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* field) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error(std::string("load_batch: truncated file at ") + field);
    return v;
}

void put_row_major(std::ostream& os, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            put<double>(os, m(i, j));
}

void get_row_major(std::istream& is, Mat& m, const char* field) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = get<double>(is, field);
}

} // namespace

void save_batch(const std::string& path, const PilotMatrix& pilots, const Batch& batch) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_batch: cannot open " + path);
    os.write("GFRA", 4);
    put<uint32_t>(os, kBatchVersion);
    put<uint32_t>(os, static_cast<uint32_t>(pilots.m));
    put<uint32_t>(os, static_cast<uint32_t>(pilots.n));
    const auto count = static_cast<uint32_t>(batch.x_true.cols());
    put<uint32_t>(os, count);
    put_row_major(os, pilots.entries);
    for (uint32_t b = 0; b < count; ++b) {
        for (int i = 0; i < pilots.n; ++i) put<double>(os, batch.x_true(i, b));
        for (int i = 0; i < pilots.m; ++i) put<double>(os, batch.y(i, b));
        put<uint32_t>(os, static_cast<uint32_t>(batch.supports[b].size()));
        for (int idx : batch.supports[b]) put<uint32_t>(os, static_cast<uint32_t>(idx));
        put<double>(os, batch.snr_db);
        put<double>(os, batch.noise_sigma[b]);
    }
    if (!os) throw std::runtime_error("save_batch: write failed for " + path);
}

std::pair<PilotMatrix, Batch> load_batch(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_batch: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "GFRA", 4) != 0)
        throw std::runtime_error("load_batch: bad magic");
    const auto version = get<uint32_t>(is, "version");
    if (version != kBatchVersion)
        throw std::runtime_error("load_batch: unsupported version " + std::to_string(version));
    const auto m = get<uint32_t>(is, "m");
    const auto n = get<uint32_t>(is, "n");
    const auto count = get<uint32_t>(is, "batch_size");
    if (m == 0 || n == 0 || m >= n)
        throw std::runtime_error("load_batch: invalid dimensions");

    PilotMatrix pilots;
    pilots.m = static_cast<int>(m);
    pilots.n = static_cast<int>(n);
    pilots.entries.resize(m, n);
    get_row_major(is, pilots.entries, "A");
    pilots.column_norm = pilots.entries.colwise().norm();

    Batch batch;
    batch.x_true.resize(n, count);
    batch.y.resize(m, count);
    batch.supports.resize(count);
    batch.noise_sigma.resize(count);
    for (uint32_t b = 0; b < count; ++b) {
        for (uint32_t i = 0; i < n; ++i) batch.x_true(i, b) = get<double>(is, "x_true");
        for (uint32_t i = 0; i < m; ++i) batch.y(i, b) = get<double>(is, "y");
        const auto sz = get<uint32_t>(is, "support size");
        batch.supports[b].resize(sz);
        for (uint32_t i = 0; i < sz; ++i) {
            auto idx = get<uint32_t>(is, "support index");
            if (idx >= n) throw std::runtime_error("load_batch: support index out of range");
            batch.supports[b][i] = static_cast<int>(idx);
        }
        batch.snr_db = get<double>(is, "snr_db");
        batch.noise_sigma[b] = get<double>(is, "noise_sigma");
    }
    return {std::move(pilots), std::move(batch)};
}

} // namespace gfra
