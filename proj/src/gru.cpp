#include "qrs/gru.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qrs/errors.hpp"

namespace qrs::gru {

namespace {

std::string pname(int layer, const char* gate) {
    return "l" + std::to_string(layer) + "." + gate;
}

// out += W[rows x cols] * x
void matvec_acc(std::span<const double> W, std::span<const double> x, std::span<double> out) {
    const size_t rows = out.size(), cols = x.size();
    for (size_t i = 0; i < rows; ++i) {
        const double* row = W.data() + i * cols;
        double acc = 0;
        for (size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        out[i] += acc;
    }
}

// out += W^T * y
void matvec_t_acc(std::span<const double> W, std::span<const double> y, std::span<double> out) {
    const size_t rows = y.size(), cols = out.size();
    for (size_t i = 0; i < rows; ++i) {
        const double* row = W.data() + i * cols;
        const double yi = y[i];
        for (size_t j = 0; j < cols; ++j) out[j] += yi * row[j];
    }
}

// dW += y * x^T
void outer_acc(std::span<double> dW, std::span<const double> y, std::span<const double> x) {
    const size_t rows = y.size(), cols = x.size();
    for (size_t i = 0; i < rows; ++i) {
        double* row = dW.data() + i * cols;
        const double yi = y[i];
        for (size_t j = 0; j < cols; ++j) row[j] += yi * x[j];
    }
}

// Per-step activations of one layer, retained for BPTT.
struct StepCache {
    std::vector<double> x, z, r, g, h;
};

struct WindowRef {
    size_t stream = 0;
    size_t at = 0;
    size_t len = 0;
};

std::vector<double> layer_step(const GruParams& params, const GruConfig& cfg, int layer,
                               std::span<const double> x, std::span<const double> h_prev,
                               StepCache* cache) {
    const int H = cfg.hidden_size;
    const auto wz = params.theta.view(pname(layer, "wz"));
    const auto uz = params.theta.view(pname(layer, "uz"));
    const auto bz = params.theta.view(pname(layer, "bz"));
    const auto wr = params.theta.view(pname(layer, "wr"));
    const auto ur = params.theta.view(pname(layer, "ur"));
    const auto br = params.theta.view(pname(layer, "br"));
    const auto wh = params.theta.view(pname(layer, "wh"));
    const auto uh = params.theta.view(pname(layer, "uh"));
    const auto bh = params.theta.view(pname(layer, "bh"));

    std::vector<double> z(bz.begin(), bz.end());
    matvec_acc(wz, x, z);
    matvec_acc(uz, h_prev, z);
    std::vector<double> r(br.begin(), br.end());
    matvec_acc(wr, x, r);
    matvec_acc(ur, h_prev, r);
    for (int i = 0; i < H; ++i) {
        z[static_cast<size_t>(i)] = nn::sigmoid(z[static_cast<size_t>(i)]);
        r[static_cast<size_t>(i)] = nn::sigmoid(r[static_cast<size_t>(i)]);
    }

    std::vector<double> rh(static_cast<size_t>(H));
    for (int i = 0; i < H; ++i)
        rh[static_cast<size_t>(i)] = r[static_cast<size_t>(i)] * h_prev[static_cast<size_t>(i)];
    std::vector<double> g(bh.begin(), bh.end());
    matvec_acc(wh, x, g);
    matvec_acc(uh, rh, g);
    for (int i = 0; i < H; ++i) g[static_cast<size_t>(i)] = std::tanh(g[static_cast<size_t>(i)]);

    std::vector<double> h(static_cast<size_t>(H));
    for (int i = 0; i < H; ++i) {
        const size_t s = static_cast<size_t>(i);
        h[s] = (1.0 - z[s]) * h_prev[s] + z[s] * g[s];
        if (!std::isfinite(h[s])) throw NumericalError("gru_cell: non-finite hidden state");
    }
    if (cache) {
        cache->x.assign(x.begin(), x.end());
        cache->z = z;
        cache->r = r;
        cache->g = g;
        cache->h = h;
    }
    return h;
}

} // namespace

void GruConfig::validate() const {
    if (hidden_layers < 1 || hidden_layers > 2)
        throw ArgumentError("gru: hidden_layers must be 1 or 2");
    if (seq_len_s < 1) throw ArgumentError("gru: seq_len_s must be >= 1");
    if (hidden_size < 1) throw ArgumentError("gru: hidden_size must be >= 1");
}

GruParams init_params(const GruConfig& cfg, uint64_t seed) {
    cfg.validate();
    GruParams p;
    std::mt19937_64 rng(seed);
    const double bound = std::sqrt(1.0 / cfg.hidden_size);
    std::uniform_real_distribution<double> dist(-bound, bound);
    const int H = cfg.hidden_size;

    for (int l = 0; l < cfg.hidden_layers; ++l) {
        const int in = cfg.in_dim(l);
        for (const char* gate : {"wz", "wr", "wh"}) p.theta.add(pname(l, gate), {H, in});
        for (const char* gate : {"uz", "ur", "uh"}) p.theta.add(pname(l, gate), {H, H});
        for (const char* gate : {"bz", "br", "bh"}) p.theta.add(pname(l, gate), {H});
    }
    p.theta.add("head.w", {H});
    p.theta.add("head.b", {1});
    for (double& v : p.theta.data) v = dist(rng);
    return p;
}

std::vector<double> gru_cell(const GruParams& params, const GruConfig& cfg, int layer,
                             std::span<const double> x, std::span<const double> h_prev) {
    cfg.validate();
    if (layer < 0 || layer >= cfg.hidden_layers) throw ArgumentError("gru_cell: bad layer index");
    if (static_cast<int>(x.size()) != cfg.in_dim(layer))
        throw ArgumentError("gru_cell: input size mismatch");
    if (static_cast<int>(h_prev.size()) != cfg.hidden_size)
        throw ArgumentError("gru_cell: hidden size mismatch");
    return layer_step(params, cfg, layer, x, h_prev, nullptr);
}

std::vector<double> forward_stream(const GruParams& params, const GruConfig& cfg,
                                   std::span<const uint8_t> bits) {
    cfg.validate();
    const auto hw = params.theta.view("head.w");
    const double hb = params.theta.view("head.b")[0];
    const int H = cfg.hidden_size;
    const size_t S = static_cast<size_t>(cfg.seq_len_samples());

    std::vector<double> probs(bits.size());
    for (size_t wstart = 0; wstart < bits.size(); wstart += S) {
        const size_t wlen = std::min(S, bits.size() - wstart);
        std::vector<std::vector<double>> h(static_cast<size_t>(cfg.hidden_layers),
                                           std::vector<double>(static_cast<size_t>(H), 0.0));
        for (size_t t = 0; t < wlen; ++t) {
            std::vector<double> x{static_cast<double>(bits[wstart + t])};
            for (int l = 0; l < cfg.hidden_layers; ++l) {
                h[static_cast<size_t>(l)] =
                    layer_step(params, cfg, l, l == 0 ? std::span<const double>(x)
                                                      : std::span<const double>(h[static_cast<size_t>(l) - 1]),
                               h[static_cast<size_t>(l)], nullptr);
            }
            double logit = hb;
            const auto& top = h[static_cast<size_t>(cfg.hidden_layers) - 1];
            for (int i = 0; i < H; ++i) logit += hw[static_cast<size_t>(i)] * top[static_cast<size_t>(i)];
            probs[wstart + t] = nn::sigmoid(logit);
        }
    }
    return probs;
}

std::vector<uint8_t> repair_stream(const GruParams& params, const GruConfig& cfg,
                                   std::span<const uint8_t> bits) {
    const auto probs = forward_stream(params, cfg, bits);
    return nn::predict_binary(probs, cfg.threshold);
}

nn::TrainConfig default_gru_train_config() {
    nn::TrainConfig tc;
    tc.lr0 = 0.001;
    tc.max_epochs = 200;
    tc.scheduler_patience = 5;
    tc.scheduler_factor = 0.1;
    tc.early_stop_patience = 7;
    tc.batch_size = 64;
    return tc;
}

namespace {

// Gradient of the window loss (sum of per-timestep BCE terms, each already
// scaled by inv_count) accumulated into grad; returns the loss sum.
double window_backward(const GruParams& params, const GruConfig& cfg,
                       std::span<const uint8_t> input, std::span<const uint8_t> target,
                       double inv_count, std::vector<double>& grad) {
    const int H = cfg.hidden_size;
    const int layers = cfg.hidden_layers;
    const size_t T = input.size();
    const auto hw = params.theta.view("head.w");
    const double hb = params.theta.view("head.b")[0];

    auto gv = [&](const std::string& name) {
        const nn::TensorEntry& e = params.theta.entry(name);
        return std::span<double>(grad.data() + e.offset, e.size);
    };

    // forward with caches
    std::vector<std::vector<StepCache>> steps(static_cast<size_t>(layers));
    for (auto& s : steps) s.resize(T);
    std::vector<std::vector<double>> h(static_cast<size_t>(layers),
                                       std::vector<double>(static_cast<size_t>(H), 0.0));
    std::vector<double> probs(T);
    double loss_sum = 0;
    for (size_t t = 0; t < T; ++t) {
        std::vector<double> x{static_cast<double>(input[t])};
        for (int l = 0; l < layers; ++l) {
            auto& cache = steps[static_cast<size_t>(l)][t];
            h[static_cast<size_t>(l)] = layer_step(
                params, cfg, l,
                l == 0 ? std::span<const double>(x)
                       : std::span<const double>(h[static_cast<size_t>(l) - 1]),
                h[static_cast<size_t>(l)], &cache);
        }
        double logit = hb;
        const auto& top = h[static_cast<size_t>(layers) - 1];
        for (int i = 0; i < H; ++i) logit += hw[static_cast<size_t>(i)] * top[static_cast<size_t>(i)];
        probs[t] = nn::sigmoid(logit);
        const double p = std::clamp(probs[t], 1e-7, 1.0 - 1e-7);
        loss_sum += (target[t] ? -std::log(p) : -std::log(1.0 - p)) * inv_count;
    }

    // BPTT
    auto dhw = gv("head.w");
    auto dhb = gv("head.b");
    std::vector<std::vector<double>> dh_carry(static_cast<size_t>(layers),
                                              std::vector<double>(static_cast<size_t>(H), 0.0));
    std::vector<double> dx_above(static_cast<size_t>(H), 0.0);
    const std::vector<double> h_zero(static_cast<size_t>(H), 0.0);

    for (size_t ti = T; ti-- > 0;) {
        const double dlogit = (probs[ti] - static_cast<double>(target[ti])) * inv_count;
        std::fill(dx_above.begin(), dx_above.end(), 0.0);

        for (int l = layers - 1; l >= 0; --l) {
            const auto& cache = steps[static_cast<size_t>(l)][ti];
            const std::vector<double>& h_prev =
                ti > 0 ? steps[static_cast<size_t>(l)][ti - 1].h : h_zero;

            // dh for this step: carry from t+1, head (top layer), dx from above
            std::vector<double> dh = dh_carry[static_cast<size_t>(l)];
            if (l == layers - 1) {
                for (int i = 0; i < H; ++i) {
                    dh[static_cast<size_t>(i)] += hw[static_cast<size_t>(i)] * dlogit;
                    dhw[static_cast<size_t>(i)] += dlogit * cache.h[static_cast<size_t>(i)];
                }
                dhb[0] += dlogit;
            } else {
                for (int i = 0; i < H; ++i) dh[static_cast<size_t>(i)] += dx_above[static_cast<size_t>(i)];
            }

            std::vector<double> dz(static_cast<size_t>(H)), dg(static_cast<size_t>(H)),
                dh_prev(static_cast<size_t>(H));
            for (int i = 0; i < H; ++i) {
                const size_t s = static_cast<size_t>(i);
                dz[s] = dh[s] * (cache.g[s] - h_prev[s]);
                dg[s] = dh[s] * cache.z[s];
                dh_prev[s] = dh[s] * (1.0 - cache.z[s]);
            }

            std::vector<double> dag(static_cast<size_t>(H)), daz(static_cast<size_t>(H)),
                dar(static_cast<size_t>(H));
            for (int i = 0; i < H; ++i) {
                const size_t s = static_cast<size_t>(i);
                dag[s] = dg[s] * (1.0 - cache.g[s] * cache.g[s]);
                daz[s] = dz[s] * cache.z[s] * (1.0 - cache.z[s]);
            }

            // candidate gate: g = tanh(Wh x + Uh (r.h) + bh)
            std::vector<double> rh(static_cast<size_t>(H)), v(static_cast<size_t>(H), 0.0);
            for (int i = 0; i < H; ++i) {
                const size_t s = static_cast<size_t>(i);
                rh[s] = cache.r[s] * h_prev[s];
            }
            outer_acc(gv(pname(l, "wh")), dag, cache.x);
            outer_acc(gv(pname(l, "uh")), dag, rh);
            {
                auto dbh = gv(pname(l, "bh"));
                for (int i = 0; i < H; ++i) dbh[static_cast<size_t>(i)] += dag[static_cast<size_t>(i)];
            }
            matvec_t_acc(params.theta.view(pname(l, "uh")), dag, v); // d(r.h)
            for (int i = 0; i < H; ++i) {
                const size_t s = static_cast<size_t>(i);
                const double dr = v[s] * h_prev[s];
                dar[s] = dr * cache.r[s] * (1.0 - cache.r[s]);
                dh_prev[s] += v[s] * cache.r[s];
            }

            outer_acc(gv(pname(l, "wr")), dar, cache.x);
            outer_acc(gv(pname(l, "ur")), dar, h_prev);
            {
                auto dbr = gv(pname(l, "br"));
                for (int i = 0; i < H; ++i) dbr[static_cast<size_t>(i)] += dar[static_cast<size_t>(i)];
            }
            matvec_t_acc(params.theta.view(pname(l, "ur")), dar, dh_prev);

            outer_acc(gv(pname(l, "wz")), daz, cache.x);
            outer_acc(gv(pname(l, "uz")), daz, h_prev);
            {
                auto dbz = gv(pname(l, "bz"));
                for (int i = 0; i < H; ++i) dbz[static_cast<size_t>(i)] += daz[static_cast<size_t>(i)];
            }
            matvec_t_acc(params.theta.view(pname(l, "uz")), daz, dh_prev);

            // dx feeds the layer below (unused at layer 0)
            if (l > 0) {
                std::fill(dx_above.begin(), dx_above.end(), 0.0);
                matvec_t_acc(params.theta.view(pname(l, "wz")), daz, dx_above);
                matvec_t_acc(params.theta.view(pname(l, "wr")), dar, dx_above);
                matvec_t_acc(params.theta.view(pname(l, "wh")), dag, dx_above);
            }
            dh_carry[static_cast<size_t>(l)] = std::move(dh_prev);
        }
    }
    return loss_sum;
}

} // namespace

std::vector<double> stream_gradient(const GruParams& params, const GruConfig& cfg,
                                    std::span<const uint8_t> input,
                                    std::span<const uint8_t> target, double* loss_out) {
    cfg.validate();
    if (input.size() != target.size()) throw ArgumentError("stream_gradient: length mismatch");
    std::vector<double> grad(params.theta.data.size(), 0.0);
    if (input.empty()) {
        if (loss_out) *loss_out = 0.0;
        return grad;
    }
    const size_t S = static_cast<size_t>(cfg.seq_len_samples());
    const double inv = 1.0 / static_cast<double>(input.size());
    double loss = 0;
    for (size_t at = 0; at < input.size(); at += S) {
        const size_t len = std::min(S, input.size() - at);
        loss += window_backward(params, cfg, input.subspan(at, len), target.subspan(at, len), inv,
                                grad);
    }
    if (loss_out) *loss_out = loss;
    return grad;
}

GruTrainResult train_gru(const std::vector<StreamPair>& streams, const GruConfig& cfg,
                         const nn::TrainConfig& tc) {
    cfg.validate();
    if (tc.lr0 <= 0 || tc.max_epochs < 1) throw ArgumentError("train_gru: bad train config");
    if (streams.empty()) throw ArgumentError("train_gru: no streams");
    for (size_t s = 0; s < streams.size(); ++s)
        if (streams[s].input.size() != streams[s].target.size())
            throw ArgumentError("train_gru: stream " + std::to_string(s) +
                                " input/target length mismatch");

    // window inventory across all streams
    const size_t S = static_cast<size_t>(cfg.seq_len_samples());
    std::vector<WindowRef> windows;
    for (size_t s = 0; s < streams.size(); ++s)
        for (size_t at = 0; at < streams[s].input.size(); at += S)
            windows.push_back({s, at, std::min(S, streams[s].input.size() - at)});
    if (windows.empty()) throw ArgumentError("train_gru: streams are empty");

    std::mt19937_64 split_rng(nn::derive_seed(tc.seed, 0x6120));
    std::shuffle(windows.begin(), windows.end(), split_rng);
    const size_t n_val = std::max<size_t>(1, windows.size() / 5);
    std::vector<WindowRef> val(windows.begin(), windows.begin() + static_cast<ptrdiff_t>(n_val));
    std::vector<WindowRef> train(windows.begin() + static_cast<ptrdiff_t>(n_val), windows.end());
    if (train.empty()) train = val; // degenerate single-window corpora

    GruTrainResult result;
    result.params = init_params(cfg, nn::derive_seed(tc.seed, 0x6121));
    GruParams best = result.params;

    nn::AdamState adam;
    double lr = tc.lr0;
    nn::PlateauScheduler sched{tc.improve_eps, tc.scheduler_patience, tc.early_stop_patience,
                               tc.scheduler_factor};

    auto eval_loss = [&](const std::vector<WindowRef>& set, const GruParams& params) {
        std::vector<double> sums(set.size(), 0.0);
        size_t count = 0;
        for (const auto& w : set) count += w.len;
#pragma omp parallel for schedule(dynamic)
        for (size_t k = 0; k < set.size(); ++k) {
            const auto& w = set[k];
            const auto& sp = streams[w.stream];
            std::span<const uint8_t> in(sp.input.data() + w.at, w.len);
            std::span<const uint8_t> tg(sp.target.data() + w.at, w.len);
            const auto probs = forward_stream(params, cfg, in);
            sums[k] = nn::bce_loss(probs, tg, {}) * static_cast<double>(w.len);
        }
        double sum = 0;
        for (double s : sums) sum += s;
        return count ? sum / static_cast<double>(count) : 0.0;
    };

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        std::mt19937_64 epoch_rng(nn::derive_seed(tc.seed, 0x6200 + static_cast<uint64_t>(epoch)));
        std::shuffle(train.begin(), train.end(), epoch_rng);

        const double epoch_lr = lr;
        double train_sum = 0;
        size_t train_count = 0;
        for (size_t at = 0; at < train.size(); at += static_cast<size_t>(tc.batch_size)) {
            const size_t take = std::min(train.size() - at, static_cast<size_t>(tc.batch_size));
            size_t batch_steps = 0;
            for (size_t b = 0; b < take; ++b) batch_steps += train[at + b].len;
            const double inv = 1.0 / static_cast<double>(batch_steps);

            // per-window gradients merged in window order: deterministic for
            // any thread count
            std::vector<std::vector<double>> wgrad(take);
            std::vector<double> wloss(take, 0.0);
#pragma omp parallel for schedule(dynamic)
            for (size_t b = 0; b < take; ++b) {
                const auto& w = train[at + b];
                const auto& sp = streams[w.stream];
                wgrad[b].assign(result.params.theta.data.size(), 0.0);
                wloss[b] = window_backward(result.params, cfg, {sp.input.data() + w.at, w.len},
                                           {sp.target.data() + w.at, w.len}, inv, wgrad[b]);
            }
            std::vector<double> grad(result.params.theta.data.size(), 0.0);
            double batch_loss = 0;
            for (size_t b = 0; b < take; ++b) {
                for (size_t j = 0; j < grad.size(); ++j) grad[j] += wgrad[b][j];
                batch_loss += wloss[b];
            }
            adam.step(result.params.theta.data, grad, epoch_lr);
            train_sum += batch_loss * static_cast<double>(batch_steps);
            train_count += batch_steps;
        }

        const double train_loss = train_count ? train_sum / static_cast<double>(train_count) : 0;
        const double val_loss = eval_loss(val, result.params);
        result.history.epochs.push_back({epoch, train_loss, val_loss, epoch_lr});

        const auto update = sched.observe(val_loss, lr);
        if (update.improved) {
            best = result.params;
            result.history.best_epoch = epoch;
            result.history.best_val = val_loss;
        }
        if (update.stop) break;
    }

    result.params = std::move(best);
    return result;
}

} // namespace qrs::gru
