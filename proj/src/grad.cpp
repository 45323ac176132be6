#include "gfra/grad.hpp"

#include <cmath>
#include <stdexcept>

#include "gfra/rng.hpp"

namespace gfra {

namespace {

std::string key(const char* base, int t) { return std::string(base) + "." + std::to_string(t); }

double loss_value(const UnrolledModel& model, const ForwardCache& c, const Mat& x_true,
                  Loss loss, double halt_penalty) {
    const auto B = x_true.cols();
    const int T = model.depth;
    if (loss == Loss::final_mse)
        return (c.output - x_true).squaredNorm() / static_cast<double>(B);
    if (model.arch == Arch::lista_h) {
        double total = 0.0;
        for (Eigen::Index b = 0; b < B; ++b) {
            const int tau = c.layers_used[b];
            for (int t = 0; t < tau; ++t)
                total += c.weights(t, b) * (c.x[t + 1].col(b) - x_true.col(b)).squaredNorm();
            total += halt_penalty * (tau + c.weights(tau - 1, b));
        }
        return total / static_cast<double>(B);
    }
    double total = 0.0;
    for (int t = 1; t <= T; ++t) total += (c.x[t] - x_true).squaredNorm();
    return total / static_cast<double>(B * T);
}

} // namespace

AdamState AdamState::init(const ParamSet& params, AdamHyper hyper) {
    AdamState s;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    s.step_count = 0;
    s.hyper = hyper;
    return s;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
    if (!params.same_shapes(grads) || !params.same_shapes(state.first_moment))
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step_count += 1;
    const auto& h = state.hyper;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step_count));
    for (auto& [name, p] : params.tensors) {
        const Mat& g = grads.at(name);
        Mat& m = state.first_moment.at(name);
        Mat& v = state.second_moment.at(name);
        m = h.beta1 * m + (1.0 - h.beta1) * g;
        v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
        p.array() -= h.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + h.eps);
    }
}

BackwardResult backward(const UnrolledModel& model, const Mat& y, const Mat& x_true,
                        const Mat* prior, Loss loss, double halt_penalty) {
    if (x_true.rows() != model.n || x_true.cols() != y.cols())
        throw std::invalid_argument("backward: x_true shape mismatch");
    if (!model.params.all_finite())
        throw std::runtime_error("backward: non-finite model parameters");
    const ForwardCache c = forward_batch(model, y, prior);
    const int T = model.depth;
    const auto B = y.cols();
    const double invB = 1.0 / static_cast<double>(B);

    BackwardResult res;
    res.grads = model.params.zeros_like();
    res.loss = loss_value(model, c, x_true, loss, halt_penalty);
    ParamSet& g = res.grads;

    // data-term gradient w.r.t. the layer-t estimate (t in 1..T)
    auto data_grad = [&](int t) -> Mat {
        if (model.arch == Arch::lista_h) {
            Mat gt;
            if (loss == Loss::final_mse) {
                const Mat gout = 2.0 * invB * (c.output - x_true);
                gt = gout * c.weights.row(t - 1).asDiagonal();
            } else {
                gt = 2.0 * invB * (c.x[t] - x_true) * c.weights.row(t - 1).asDiagonal();
            }
            return gt;
        }
        if (loss == Loss::final_mse)
            return t == T ? Mat(2.0 * invB * (c.x[T] - x_true)) : Mat(Mat::Zero(model.n, B));
        return 2.0 * invB / T * (c.x[t] - x_true);
    };

    // lista-h: gradient flowing into the raw scores via the halting weights
    Mat q;  // T x B, dL/dz_t scaled by the sigmoid derivative
    if (model.arch == Arch::lista_h) {
        Mat dLdw = Mat::Zero(T, B);
        if (loss == Loss::final_mse) {
            const Mat gout = 2.0 * invB * (c.output - x_true);
            for (int t = 0; t < T; ++t)
                for (Eigen::Index b = 0; b < B; ++b)
                    dLdw(t, b) = gout.col(b).dot(c.x[t + 1].col(b));
        } else {
            for (int t = 0; t < T; ++t)
                for (Eigen::Index b = 0; b < B; ++b)
                    dLdw(t, b) = invB * (c.x[t + 1].col(b) - x_true.col(b)).squaredNorm();
            for (Eigen::Index b = 0; b < B; ++b)
                dLdw(c.layers_used[b] - 1, b) += halt_penalty * invB;
        }
        q = Mat::Zero(T, B);
        for (Eigen::Index b = 0; b < B; ++b) {
            const int tau = c.layers_used[b];
            for (int t = 0; t < tau - 1; ++t) {
                // w_t = s_t for t < tau, w_tau = 1 - sum of the earlier scores
                const double dLds = dLdw(t, b) - dLdw(tau - 1, b);
                const double s = c.scores(t, b);
                q(t, b) = dLds * s * (1.0 - s);
            }
        }
    }

    if (model.arch == Arch::lamp) {
        const double m = model.m;
        const double sqrt_m = std::sqrt(m);
        Mat gx = data_grad(T);
        Mat gv_next;  // dL/dV_{t+1}, complete once layer t+1 has been processed
        for (int t = T - 1; t >= 0; --t) {
            const Mat& pre = c.pre[t];
            const double alpha = model.params.at(key("alpha", t))(0, 0);
            const Vec& vnorm = c.vnorm[t];
            Mat gpre(model.n, B);
            Vec gtheta = Vec::Zero(B);
            for (Eigen::Index b = 0; b < B; ++b) {
                const double theta = alpha * vnorm(b) / sqrt_m;
                for (int i = 0; i < model.n; ++i) {
                    const double u = pre(i, b);
                    if (std::abs(u) > theta) {
                        gpre(i, b) = gx(i, b);
                        gtheta(b) -= (u > 0 ? 1.0 : -1.0) * gx(i, b);
                    } else {
                        gpre(i, b) = 0.0;
                    }
                }
            }
            g.at(key("alpha", t))(0, 0) += gtheta.dot(vnorm) / sqrt_m;
            Mat gv = model.params.at(key("b", t)).transpose() * gpre;
            for (Eigen::Index b = 0; b < B; ++b)
                if (vnorm(b) > 0)
                    gv.col(b) += (alpha * gtheta(b) / (sqrt_m * vnorm(b))) * c.v[t].col(b);
            if (t + 1 < T) gv += gv_next * (c.nnz[t + 1] / m).asDiagonal();
            g.at(key("b", t)) += gpre * c.v[t].transpose();
            Mat gx_prev = gpre - model.pilot.transpose() * gv;
            if (t >= 1) gx_prev += data_grad(t);
            gx = std::move(gx_prev);
            gv_next = std::move(gv);
        }
        if (!g.all_finite()) throw std::runtime_error("backward: non-finite gradient (lamp)");
        return res;
    }

    // lista / lista-p / lista-h
    Mat gx = data_grad(T);
    for (int t = T - 1; t >= 0; --t) {
        if (model.arch == Arch::lista_h) {
            // score path: z_t = bh + wh . |hmap (y - A x_{t+1})|
            const Mat& f = c.feat[t];
            const Mat& wh = model.params.at(key("wh", t));
            Mat d(model.halt_feat_dim, B);  // dz/df scaled by q
            Vec qrow = q.row(t).transpose();
            for (Eigen::Index b = 0; b < B; ++b)
                for (int i = 0; i < model.halt_feat_dim; ++i)
                    d(i, b) = qrow(b) * wh(i, 0) * (f(i, b) > 0 ? 1.0 : (f(i, b) < 0 ? -1.0 : 0.0));
            const Mat r = y - model.pilot * c.x[t + 1];
            g.at(key("hmap", t)) += d * r.transpose();
            g.at(key("wh", t)).col(0) += f.cwiseAbs() * qrow;
            g.at(key("bh", t))(0, 0) += qrow.sum();
            const Mat gr = model.params.at(key("hmap", t)).transpose() * d;
            gx -= model.pilot.transpose() * gr;  // r = y - A x  =>  dL/dx = -A^T dL/dr
        }
        const Mat& pre = c.pre[t];
        const double theta = model.params.at(key("theta", t))(0, 0);
        Mat gpre(model.n, B);
        double gtheta = 0.0;
        for (Eigen::Index b = 0; b < B; ++b) {
            for (int i = 0; i < model.n; ++i) {
                if (model.arch == Arch::lista_p && (*prior)(i, b) != 0.0) {
                    gpre(i, b) = gx(i, b);  // identity coordinate, no theta dependence
                    continue;
                }
                const double u = pre(i, b);
                if (std::abs(u) > theta) {
                    gpre(i, b) = gx(i, b);
                    gtheta -= (u > 0 ? 1.0 : -1.0) * gx(i, b);
                } else {
                    gpre(i, b) = 0.0;
                }
            }
        }
        g.at(key("w1", t)) += gpre * y.transpose();
        g.at(key("w2", t)) += gpre * c.x[t].transpose();
        g.at(key("theta", t))(0, 0) += gtheta;
        Mat gx_prev = model.params.at(key("w2", t)).transpose() * gpre;
        if (t >= 1) gx_prev += data_grad(t);
        gx = std::move(gx_prev);
    }
    if (!g.all_finite()) throw std::runtime_error("backward: non-finite gradient");
    return res;
}

double grad_check(const UnrolledModel& model, const Mat& y, const Mat& x_true,
                  const Mat* prior, Loss loss, double h, int n_coords, uint64_t seed,
                  std::string* worst_coord) {
    if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("grad_check: h out of range");
    const BackwardResult analytic = backward(model, y, x_true, prior, loss);

    // flat index over all parameter coordinates
    std::vector<std::pair<std::string, long>> offsets;
    long total = 0;
    for (const auto& [name, t] : model.params.tensors) {
        offsets.emplace_back(name, total);
        total += t.size();
    }
    Rng rng = Rng(seed).split(0x6dc3u);
    double worst = 0.0;
    UnrolledModel probe = model;
    for (int s = 0; s < n_coords; ++s) {
        const long flat = static_cast<long>(rng.below(static_cast<uint64_t>(total)));
        size_t block = offsets.size() - 1;
        while (offsets[block].second > flat) --block;
        const std::string& name = offsets[block].first;
        const long local = flat - offsets[block].second;
        Mat& tensor = probe.params.at(name);
        const double saved = tensor(local);

        tensor(local) = saved + h;
        const ForwardCache cp = forward_batch(probe, y, prior);
        const double lp = loss_value(probe, cp, x_true, loss, 0.0);
        tensor(local) = saved - h;
        const ForwardCache cm = forward_batch(probe, y, prior);
        const double lm = loss_value(probe, cm, x_true, loss, 0.0);
        tensor(local) = saved;

        if (cp.mask_sig != cm.mask_sig) continue;  // perturbation crossed a kink
        const double fd = (lp - lm) / (2.0 * h);
        const double an = analytic.grads.at(name)(local);
        const double denom = std::max(std::abs(fd), 1e-4);
        const double rel = std::abs(fd - an) / denom;
        if (rel > worst) {
            worst = rel;
            if (worst_coord) *worst_coord = name + "[" + std::to_string(local) + "]";
        }
    }
    return worst;
}

} // namespace gfra
