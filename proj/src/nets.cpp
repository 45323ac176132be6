#include "gfra/nets.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gfra/rng.hpp"
#include "gfra/solvers.hpp"

namespace gfra {

std::string arch_name(Arch a) {
    switch (a) {
        case Arch::lista: return "lista";
        case Arch::lamp: return "lamp";
        case Arch::lista_p: return "lista-p";
        case Arch::lista_h: return "lista-h";
    }
    throw std::logic_error("arch_name: bad enum");
}

Arch arch_from_name(const std::string& name) {
    if (name == "lista") return Arch::lista;
    if (name == "lamp") return Arch::lamp;
    if (name == "lista-p" || name == "lista_p") return Arch::lista_p;
    if (name == "lista-h" || name == "lista_h") return Arch::lista_h;
    throw std::invalid_argument("unknown architecture: " + name);
}

Mat& ParamSet::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("ParamSet: no tensor named " + name);
    return it->second;
}

const Mat& ParamSet::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("ParamSet: no tensor named " + name);
    return it->second;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out;
    for (const auto& [name, t] : tensors) out.tensors[name] = Mat::Zero(t.rows(), t.cols());
    return out;
}

bool ParamSet::same_shapes(const ParamSet& other) const {
    if (tensors.size() != other.tensors.size()) return false;
    for (const auto& [name, t] : tensors) {
        auto it = other.tensors.find(name);
        if (it == other.tensors.end()) return false;
        if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) return false;
    }
    return true;
}

bool ParamSet::all_finite() const {
    for (const auto& [name, t] : tensors)
        if (!t.allFinite()) return false;
    return true;
}

namespace {

std::string key(const char* base, int t) { return std::string(base) + "." + std::to_string(t); }

void hash_bytes(uint64_t& h, const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

void hash_bool(uint64_t& h, bool b) {
    unsigned char c = b ? 1 : 0;
    hash_bytes(h, &c, 1);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

int UnrolledModel::param_count() const {
    int total = 0;
    for (const auto& [name, t] : params.tensors) total += static_cast<int>(t.size());
    return total;
}

UnrolledModel init_lista(const PilotMatrix& pilots, int depth, double beta, double theta0) {
    if (depth < 1) throw std::invalid_argument("init_lista: depth must be >= 1");
    if (theta0 < 0) throw std::invalid_argument("init_lista: theta0 must be nonnegative");
    UnrolledModel model;
    model.arch = Arch::lista;
    model.m = pilots.m;
    model.n = pilots.n;
    model.depth = depth;
    model.pilot = pilots.entries;
    model.pilot_seed = pilots.seed;
    model.pilot_normalized = pilots.normalized;
    if (beta <= 0) beta = 1.0 / lipschitz_upper(pilots);
    const Mat w1 = beta * pilots.entries.transpose();
    const Mat w2 = Mat::Identity(pilots.n, pilots.n) -
                   beta * (pilots.entries.transpose() * pilots.entries);
    for (int t = 0; t < depth; ++t) {
        model.params.tensors[key("w1", t)] = w1;
        model.params.tensors[key("w2", t)] = w2;
        model.params.tensors[key("theta", t)] = Mat::Constant(1, 1, theta0);
    }
    return model;
}

UnrolledModel init_listap(const PilotMatrix& pilots, int depth, double beta, double theta0) {
    UnrolledModel model = init_lista(pilots, depth, beta, theta0);
    model.arch = Arch::lista_p;
    return model;
}

UnrolledModel init_lamp(const PilotMatrix& pilots, int depth, double alpha0) {
    if (depth < 1) throw std::invalid_argument("init_lamp: depth must be >= 1");
    UnrolledModel model;
    model.arch = Arch::lamp;
    model.m = pilots.m;
    model.n = pilots.n;
    model.depth = depth;
    model.pilot = pilots.entries;
    model.pilot_seed = pilots.seed;
    model.pilot_normalized = pilots.normalized;
    for (int t = 0; t < depth; ++t) {
        model.params.tensors[key("b", t)] = pilots.entries.transpose();
        model.params.tensors[key("alpha", t)] = Mat::Constant(1, 1, alpha0);
    }
    return model;
}

UnrolledModel init_listah(const PilotMatrix& pilots, int depth, double beta, double theta0,
                          int feat_dim, double epsilon_halt, uint64_t seed) {
    if (feat_dim < 1) throw std::invalid_argument("init_listah: feat_dim must be >= 1");
    if (!(epsilon_halt > 0 && epsilon_halt < 1))
        throw std::invalid_argument("init_listah: epsilon_halt must be in (0,1)");
    UnrolledModel model = init_lista(pilots, depth, beta, theta0);
    model.arch = Arch::lista_h;
    model.epsilon_halt = epsilon_halt;
    model.halt_feat_dim = feat_dim;
    Rng rng = Rng(seed).split(0xac7u);
    const double sd = 1.0 / std::sqrt(static_cast<double>(pilots.m));
    for (int t = 0; t < depth; ++t) {
        Mat hmap(feat_dim, pilots.m);
        for (int i = 0; i < feat_dim; ++i)
            for (int j = 0; j < pilots.m; ++j) hmap(i, j) = sd * rng.gaussian();
        model.params.tensors[key("hmap", t)] = hmap;
        // negative feature weights + positive bias: the score starts low while the
        // residual is large and rises once the iterate has converged. The slope is
        // sized so that a residual near the moderate-SNR noise floor flips the sign
        // of the pre-activation while an unconverged residual keeps it well negative,
        // which leaves every layer with nonzero halting weight at initialization.
        model.params.tensors[key("wh", t)] =
            Mat::Constant(feat_dim, 1, -20.0 / feat_dim);
        model.params.tensors[key("bh", t)] = Mat::Constant(1, 1, 3.0);
    }
    return model;
}

ForwardCache forward_batch(const UnrolledModel& model, const Mat& y, const Mat* prior) {
    if (y.rows() != model.m) throw std::invalid_argument("forward_batch: y row count mismatch");
    if (model.arch == Arch::lista_p) {
        if (!prior) throw std::invalid_argument("forward_batch: lista-p requires a prior");
        if (prior->rows() != model.n || prior->cols() != y.cols())
            throw std::invalid_argument("forward_batch: prior shape mismatch");
    }
    const int T = model.depth;
    const auto B = y.cols();
    const int n = model.n;
    ForwardCache c;
    c.mask_sig = 0xcbf29ce484222325ULL;
    c.x.reserve(T + 1);
    c.x.push_back(Mat::Zero(n, B));
    c.pre.reserve(T);

    if (model.arch == Arch::lamp) {
        const double m = model.m;
        const double sqrt_m = std::sqrt(m);
        Mat v_prev = Mat::Zero(model.m, B);
        for (int t = 0; t < T; ++t) {
            const Mat& xt = c.x.back();
            Vec nnz(B);
            for (Eigen::Index b = 0; b < B; ++b)
                nnz(b) = static_cast<double>((xt.col(b).array() != 0.0).count());
            Mat v = y - model.pilot * xt + v_prev * (nnz / m).asDiagonal();
            Vec vnorm = v.colwise().norm();
            const double alpha = model.params.at(key("alpha", t))(0, 0);
            Mat pre = xt + model.params.at(key("b", t)) * v;
            Mat next(n, B);
            for (Eigen::Index b = 0; b < B; ++b) {
                const double theta = alpha * vnorm(b) / sqrt_m;
                for (int i = 0; i < n; ++i) {
                    const double u = pre(i, b);
                    const bool live = std::abs(u) > theta;
                    hash_bool(c.mask_sig, live);
                    next(i, b) = live ? u - (u > 0 ? theta : -theta) : 0.0;
                }
            }
            c.nnz.push_back(std::move(nnz));
            c.vnorm.push_back(std::move(vnorm));
            c.v.push_back(std::move(v));
            c.pre.push_back(std::move(pre));
            c.x.push_back(std::move(next));
            v_prev = c.v.back();
        }
        c.output = c.x.back();
        c.layers_used.assign(B, T);
        return c;
    }

    // lista family
    const bool halting = model.arch == Arch::lista_h;
    if (halting) {
        c.scores.resize(T, B);
        c.feat.reserve(T);
    }
    for (int t = 0; t < T; ++t) {
        Mat pre = model.params.at(key("w1", t)) * y + model.params.at(key("w2", t)) * c.x.back();
        const double theta = model.params.at(key("theta", t))(0, 0);
        Mat next(n, B);
        for (Eigen::Index b = 0; b < B; ++b) {
            for (int i = 0; i < n; ++i) {
                const double u = pre(i, b);
                if (model.arch == Arch::lista_p && (*prior)(i, b) != 0.0) {
                    next(i, b) = u;  // known-support coordinate bypasses shrinkage
                    continue;
                }
                const bool live = std::abs(u) > theta;
                hash_bool(c.mask_sig, live);
                next(i, b) = live ? u - (u > 0 ? theta : -theta) : 0.0;
            }
        }
        c.pre.push_back(std::move(pre));
        c.x.push_back(std::move(next));
        if (halting) {
            Mat r = y - model.pilot * c.x.back();
            Mat f = model.params.at(key("hmap", t)) * r;
            const Mat& wh = model.params.at(key("wh", t));
            const double bh = model.params.at(key("bh", t))(0, 0);
            for (Eigen::Index b = 0; b < B; ++b) {
                double z = bh;
                for (int i = 0; i < model.halt_feat_dim; ++i) {
                    hash_bool(c.mask_sig, f(i, b) > 0);
                    z += wh(i, 0) * std::abs(f(i, b));
                }
                c.scores(t, b) = sigmoid(z);
            }
            c.feat.push_back(std::move(f));
        }
    }

    if (!halting) {
        c.output = c.x.back();
        c.layers_used.assign(B, T);
        return c;
    }

    // ACT-style halting: stop at the first layer whose cumulative raw score
    // reaches 1 - epsilon_halt; that layer takes the leftover mass.
    c.weights = Mat::Zero(T, B);
    c.layers_used.resize(B);
    c.output = Mat::Zero(n, B);
    const double stop = 1.0 - model.epsilon_halt;
    for (Eigen::Index b = 0; b < B; ++b) {
        double cum = 0.0;
        int tau = T;
        for (int t = 0; t < T; ++t) {
            if (t == T - 1 || cum + c.scores(t, b) >= stop) {
                tau = t + 1;
                break;
            }
            c.weights(t, b) = c.scores(t, b);
            cum += c.scores(t, b);
        }
        c.weights(tau - 1, b) = 1.0 - cum;
        c.layers_used[b] = tau;
        hash_bytes(c.mask_sig, &tau, sizeof(tau));
        for (int t = 0; t < tau; ++t) c.output.col(b) += c.weights(t, b) * c.x[t + 1].col(b);
    }
    return c;
}

namespace {

ForwardResult from_cache(const ForwardCache& c) {
    ForwardResult r;
    r.estimate = c.output.col(0);
    for (size_t t = 1; t < c.x.size(); ++t) r.per_layer_estimates.push_back(c.x[t].col(0));
    r.layers_used = c.layers_used[0];
    return r;
}

} // namespace

ForwardResult lista_forward(const UnrolledModel& model, const Vec& y) {
    if (model.arch != Arch::lista) throw std::invalid_argument("lista_forward: wrong arch");
    return from_cache(forward_batch(model, y));
}

ForwardResult lamp_forward(const UnrolledModel& model, const Vec& y) {
    if (model.arch != Arch::lamp) throw std::invalid_argument("lamp_forward: wrong arch");
    return from_cache(forward_batch(model, y));
}

ForwardResult listap_forward(const UnrolledModel& model, const Vec& y, const Vec& prior) {
    if (model.arch != Arch::lista_p) throw std::invalid_argument("listap_forward: wrong arch");
    if (prior.size() != model.n) throw std::invalid_argument("listap_forward: prior length");
    Mat p = prior;
    return from_cache(forward_batch(model, y, &p));
}

ForwardResult listah_forward(const UnrolledModel& model, const Vec& y) {
    if (model.arch != Arch::lista_h) throw std::invalid_argument("listah_forward: wrong arch");
    if (y.size() != model.m) throw std::invalid_argument("listah_forward: y length");
    const int T = model.depth;
    const double stop = 1.0 - model.epsilon_halt;
    ForwardResult r;
    Vec x = Vec::Zero(model.n);
    Vec out = Vec::Zero(model.n);
    double cum = 0.0;
    for (int t = 0; t < T; ++t) {
        Vec pre = model.params.at(key("w1", t)) * y + model.params.at(key("w2", t)) * x;
        x = soft_threshold(pre, model.params.at(key("theta", t))(0, 0));
        r.per_layer_estimates.push_back(x);
        Vec f = model.params.at(key("hmap", t)) * (y - model.pilot * x);
        const double z = model.params.at(key("wh", t)).col(0).dot(f.cwiseAbs()) +
                         model.params.at(key("bh", t))(0, 0);
        const double s = sigmoid(z);
        if (t == T - 1 || cum + s >= stop) {
            r.halting_weights.push_back(1.0 - cum);
            out += (1.0 - cum) * x;
            r.layers_used = t + 1;
            break;
        }
        r.halting_weights.push_back(s);
        out += s * x;
        cum += s;
    }
    r.estimate = out;
    return r;
}

Vec make_prior(const std::vector<int>& support, double reveal_fraction, uint64_t seed, int n) {
    if (reveal_fraction < 0 || reveal_fraction > 1)
        throw std::invalid_argument("make_prior: reveal_fraction must be in [0,1]");
    Vec prior = Vec::Zero(n);
    if (reveal_fraction == 0) return prior;
    if (support.empty()) throw std::invalid_argument("make_prior: empty support");
    const auto reveal = static_cast<size_t>(
        std::ceil(reveal_fraction * static_cast<double>(support.size())));
    std::vector<int> pool = support;
    Rng rng = Rng(seed).split(0x9127u);
    for (size_t i = 0; i < reveal; ++i) {
        size_t j = i + static_cast<size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
        prior(pool[i]) = 1.0;
    }
    return prior;
}

Mat make_prior_batch(const std::vector<std::vector<int>>& supports, double reveal_fraction,
                     uint64_t seed, int n) {
    Mat prior(n, static_cast<Eigen::Index>(supports.size()));
    Rng root(seed);
    for (size_t b = 0; b < supports.size(); ++b)
        prior.col(static_cast<Eigen::Index>(b)) =
            make_prior(supports[b], reveal_fraction, root.split(b).seed(), n);
    return prior;
}

namespace {

constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* field) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is)
        throw std::runtime_error(std::string("load_checkpoint: truncated file at ") + field);
    return v;
}

// Parameter shapes implied by (arch, m, n, depth, feat_dim).
std::map<std::string, std::pair<int, int>> expected_shapes(Arch arch, int m, int n, int depth,
                                                           int feat_dim) {
    std::map<std::string, std::pair<int, int>> shapes;
    for (int t = 0; t < depth; ++t) {
        if (arch == Arch::lamp) {
            shapes[key("b", t)] = {n, m};
            shapes[key("alpha", t)] = {1, 1};
            continue;
        }
        shapes[key("w1", t)] = {n, m};
        shapes[key("w2", t)] = {n, n};
        shapes[key("theta", t)] = {1, 1};
        if (arch == Arch::lista_h) {
            shapes[key("hmap", t)] = {feat_dim, m};
            shapes[key("wh", t)] = {feat_dim, 1};
            shapes[key("bh", t)] = {1, 1};
        }
    }
    return shapes;
}

} // namespace

void save_checkpoint(const UnrolledModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write("UNET", 4);
    put<uint32_t>(os, kCheckpointVersion);
    put<uint32_t>(os, static_cast<uint32_t>(model.arch));
    put<uint32_t>(os, static_cast<uint32_t>(model.m));
    put<uint32_t>(os, static_cast<uint32_t>(model.n));
    put<uint32_t>(os, static_cast<uint32_t>(model.depth));
    put<uint64_t>(os, model.pilot_seed);

    std::map<std::string, Mat> blocks = model.params.tensors;
    blocks["meta.epsilon_halt"] = Mat::Constant(1, 1, model.epsilon_halt);
    blocks["meta.pilot_normalized"] = Mat::Constant(1, 1, model.pilot_normalized ? 1.0 : 0.0);
    blocks["meta.halt_feat_dim"] = Mat::Constant(1, 1, static_cast<double>(model.halt_feat_dim));
    put<uint32_t>(os, static_cast<uint32_t>(blocks.size()));
    for (const auto& [name, t] : blocks) {
        put<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<uint32_t>(os, static_cast<uint32_t>(t.rows()));
        put<uint32_t>(os, static_cast<uint32_t>(t.cols()));
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            for (Eigen::Index j = 0; j < t.cols(); ++j) put<double>(os, t(i, j));
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

UnrolledModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "UNET", 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic");
    const auto version = get<uint32_t>(is, "version");
    if (version != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(version));
    const auto arch_id = get<uint32_t>(is, "arch");
    if (arch_id > 3) throw std::runtime_error("load_checkpoint: bad arch id");
    UnrolledModel model;
    model.arch = static_cast<Arch>(arch_id);
    model.m = static_cast<int>(get<uint32_t>(is, "m"));
    model.n = static_cast<int>(get<uint32_t>(is, "n"));
    model.depth = static_cast<int>(get<uint32_t>(is, "depth"));
    model.pilot_seed = get<uint64_t>(is, "pilot seed");
    if (model.m <= 0 || model.n <= model.m || model.depth < 1)
        throw std::runtime_error("load_checkpoint: invalid dimensions");

    const auto count = get<uint32_t>(is, "block count");
    std::map<std::string, Mat> blocks;
    for (uint32_t i = 0; i < count; ++i) {
        const auto len = get<uint32_t>(is, "name length");
        if (len == 0 || len > 256) throw std::runtime_error("load_checkpoint: bad name length");
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw std::runtime_error("load_checkpoint: truncated file at name");
        const auto rows = get<uint32_t>(is, "rows");
        const auto cols = get<uint32_t>(is, "cols");
        Mat t(rows, cols);
        for (uint32_t r = 0; r < rows; ++r)
            for (uint32_t cidx = 0; cidx < cols; ++cidx) t(r, cidx) = get<double>(is, name.c_str());
        blocks[name] = std::move(t);
    }

    auto take_meta = [&](const char* name) {
        auto it = blocks.find(name);
        if (it == blocks.end())
            throw std::runtime_error(std::string("load_checkpoint: missing block ") + name);
        double v = it->second(0, 0);
        blocks.erase(it);
        return v;
    };
    model.epsilon_halt = take_meta("meta.epsilon_halt");
    model.pilot_normalized = take_meta("meta.pilot_normalized") != 0.0;
    model.halt_feat_dim = static_cast<int>(take_meta("meta.halt_feat_dim"));

    const auto shapes =
        expected_shapes(model.arch, model.m, model.n, model.depth, model.halt_feat_dim);
    if (blocks.size() != shapes.size())
        throw std::runtime_error("load_checkpoint: parameter block count mismatch");
    for (const auto& [name, shape] : shapes) {
        auto it = blocks.find(name);
        if (it == blocks.end())
            throw std::runtime_error("load_checkpoint: missing parameter " + name);
        if (it->second.rows() != shape.first || it->second.cols() != shape.second)
            throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    }
    model.params.tensors = std::move(blocks);
    if (!model.params.all_finite())
        throw std::runtime_error("load_checkpoint: non-finite parameter values");

    model.pilot =
        gen_pilot_matrix(model.m, model.n, model.pilot_seed, model.pilot_normalized).entries;
    return model;
}

void require_pilot_match(const UnrolledModel& model, const PilotMatrix& pilots) {
    if (model.pilot_seed != pilots.seed || model.m != pilots.m || model.n != pilots.n ||
        model.pilot_normalized != pilots.normalized)
        throw std::runtime_error(
            "model/pilot mismatch: the checkpoint was trained against a different pilot "
            "matrix (seed " +
            std::to_string(model.pilot_seed) + ", " + std::to_string(model.m) + "x" +
            std::to_string(model.n) + ")");
}

} // namespace gfra
