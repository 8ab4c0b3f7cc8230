#include "qrs/convnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qrs/errors.hpp"

namespace qrs::nn {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

std::string conv_w(int l) { return "conv" + std::to_string(l) + ".w"; }
std::string conv_b(int l) { return "conv" + std::to_string(l) + ".b"; }
std::string bn_g(int l) { return "bn" + std::to_string(l) + ".gamma"; }
std::string bn_b(int l) { return "bn" + std::to_string(l) + ".beta"; }

// Copy one channel row into a (len + 2*pad) buffer with the configured border.
void fill_padded(const double* src, double* dst, int len, int pad, PadMode mode) {
    std::copy(src, src + len, dst + pad);
    if (mode == PadMode::Zero) {
        std::fill(dst, dst + pad, 0.0);
        std::fill(dst + pad + len, dst + 2 * pad + len, 0.0);
    } else {
        for (int i = 0; i < pad; ++i) {
            dst[i] = src[len - pad + i];
            dst[pad + len + i] = src[i];
        }
    }
}

size_t count_unmasked(const SegmentBatch& batch) {
    size_t c = 0;
    for (uint8_t m : batch.mask) c += m ? 1 : 0;
    return c;
}

} // namespace

void ConvNetConfig::validate() const {
    if (depth < 2) throw ArgumentError("convnet: depth must be >= 2");
    if (channels < 1) throw ArgumentError("convnet: channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw ArgumentError("convnet: kernel must be odd");
    if (threshold < 0 || threshold > 1) throw ArgumentError("convnet: threshold must be in [0,1]");
}

ModelParams init_params(const ConvNetConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelParams p;
    std::mt19937_64 rng(seed);

    for (int l = 0; l < cfg.depth; ++l) {
        const int in_ch = cfg.in_channels(l);
        p.theta.add(conv_w(l), {cfg.channels, in_ch, cfg.kernel});
        p.theta.add(conv_b(l), {cfg.channels});
        p.theta.add(bn_g(l), {cfg.channels});
        p.theta.add(bn_b(l), {cfg.channels});

        const double bound = std::sqrt(1.0 / (in_ch * cfg.kernel));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : p.theta.view(conv_w(l))) w = dist(rng);
        for (double& b : p.theta.view(conv_b(l))) b = dist(rng);
        for (double& g : p.theta.view(bn_g(l))) g = 1.0;

        BnStats stats;
        stats.mean.assign(static_cast<size_t>(cfg.channels), 0.0);
        stats.var.assign(static_cast<size_t>(cfg.channels), 1.0);
        p.bn.push_back(std::move(stats));
    }

    p.theta.add("score.w", {cfg.channels});
    p.theta.add("score.b", {1});
    const double bound = std::sqrt(1.0 / cfg.channels);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : p.theta.view("score.w")) w = dist(rng);
    for (double& b : p.theta.view("score.b")) b = dist(rng);
    return p;
}

SegmentBatch SegmentBatch::from_segments(std::span<const pre::Segment* const> segments) {
    SegmentBatch batch;
    if (segments.empty()) throw ArgumentError("batch: no segments");
    batch.n = static_cast<int>(segments.size());
    batch.len = static_cast<int>(segments[0]->values.size());
    batch.x.reserve(static_cast<size_t>(batch.n) * batch.len);
    batch.y.reserve(batch.x.capacity());
    batch.mask.reserve(batch.x.capacity());
    for (const pre::Segment* seg : segments) {
        if (static_cast<int>(seg->values.size()) != batch.len)
            throw ArgumentError("batch: segment lengths differ");
        batch.x.insert(batch.x.end(), seg->values.begin(), seg->values.end());
        batch.y.insert(batch.y.end(), seg->labels.begin(), seg->labels.end());
        for (int i = 0; i < batch.len; ++i) batch.mask.push_back(i < seg->valid ? 1 : 0);
    }
    return batch;
}

std::vector<double> forward_batch(ModelParams& params, const ConvNetConfig& cfg,
                                  const SegmentBatch& batch, Mode mode, bool update_running,
                                  ForwardCache* cache) {
    cfg.validate();
    if (batch.n < 1 || batch.len < 1) throw ArgumentError("forward: empty batch");
    if (batch.x.size() != static_cast<size_t>(batch.n) * batch.len)
        throw ArgumentError("forward: batch buffer size mismatch");
    if (static_cast<int>(params.bn.size()) != cfg.depth)
        throw ArgumentError("forward: params depth does not match config");

    const int n = batch.n;
    const int L = batch.len;
    const int C = cfg.channels;
    const int K = cfg.kernel;
    const int pad = K / 2;
    const int Lp = L + 2 * pad;

    ForwardCache local;
    ForwardCache& cc = cache ? *cache : local;
    cc.inputs.assign(static_cast<size_t>(cfg.depth) + 1, {});
    cc.xhat.assign(static_cast<size_t>(cfg.depth), {});
    cc.mu.assign(static_cast<size_t>(cfg.depth), {});
    cc.inv_s.assign(static_cast<size_t>(cfg.depth), {});

    cc.inputs[0] = batch.x; // single channel
    std::vector<double> padded;
    std::vector<double> conv_out;

    for (int l = 0; l < cfg.depth; ++l) {
        const int in_ch = cfg.in_channels(l);
        const auto W = params.theta.view(conv_w(l));
        const auto B = params.theta.view(conv_b(l));
        const auto gamma = params.theta.view(bn_g(l));
        const auto beta = params.theta.view(bn_b(l));
        const std::vector<double>& in = cc.inputs[static_cast<size_t>(l)];

        // every reduction below is owned by a single loop index, so results
        // are bit-identical for any thread count
        padded.assign(static_cast<size_t>(n) * in_ch * Lp, 0.0);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < in_ch; ++c)
                fill_padded(in.data() + (static_cast<size_t>(i) * in_ch + c) * L,
                            padded.data() + (static_cast<size_t>(i) * in_ch + c) * Lp, L, pad,
                            cfg.padding);

        conv_out.assign(static_cast<size_t>(n) * C * L, 0.0);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            for (int o = 0; o < C; ++o) {
                double* out = conv_out.data() + (static_cast<size_t>(i) * C + o) * L;
                for (int t = 0; t < L; ++t) out[t] = B[static_cast<size_t>(o)];
                for (int c = 0; c < in_ch; ++c) {
                    const double* src0 = padded.data() + (static_cast<size_t>(i) * in_ch + c) * Lp;
                    const double* wrow = W.data() + (static_cast<size_t>(o) * in_ch + c) * K;
                    for (int k = 0; k < K; ++k) {
                        const double w = wrow[k];
                        const double* src = src0 + k;
                        for (int t = 0; t < L; ++t) out[t] += w * src[t];
                    }
                }
            }
        }

        // batch statistics over (item, position) per channel
        auto& mu = cc.mu[static_cast<size_t>(l)];
        auto& inv_s = cc.inv_s[static_cast<size_t>(l)];
        mu.assign(static_cast<size_t>(C), 0.0);
        inv_s.assign(static_cast<size_t>(C), 0.0);
        if (mode == Mode::Train) {
            const double m = static_cast<double>(n) * L;
            std::vector<double> var(static_cast<size_t>(C), 0.0);
#pragma omp parallel for schedule(static)
            for (int c = 0; c < C; ++c) {
                double sum = 0;
                for (int i = 0; i < n; ++i) {
                    const double* row = conv_out.data() + (static_cast<size_t>(i) * C + c) * L;
                    for (int t = 0; t < L; ++t) sum += row[t];
                }
                const double mc = sum / m;
                mu[static_cast<size_t>(c)] = mc;
                double sq = 0;
                for (int i = 0; i < n; ++i) {
                    const double* row = conv_out.data() + (static_cast<size_t>(i) * C + c) * L;
                    for (int t = 0; t < L; ++t) sq += (row[t] - mc) * (row[t] - mc);
                }
                var[static_cast<size_t>(c)] = sq / m;
                inv_s[static_cast<size_t>(c)] = 1.0 / std::sqrt(var[static_cast<size_t>(c)] + kBnEps);
            }
            if (update_running) {
                auto& stats = params.bn[static_cast<size_t>(l)];
                for (int c = 0; c < C; ++c) {
                    stats.mean[static_cast<size_t>(c)] =
                        (1 - kBnMomentum) * stats.mean[static_cast<size_t>(c)] +
                        kBnMomentum * mu[static_cast<size_t>(c)];
                    stats.var[static_cast<size_t>(c)] =
                        (1 - kBnMomentum) * stats.var[static_cast<size_t>(c)] +
                        kBnMomentum * var[static_cast<size_t>(c)];
                }
            }
        } else {
            const auto& stats = params.bn[static_cast<size_t>(l)];
            for (int c = 0; c < C; ++c) {
                mu[static_cast<size_t>(c)] = stats.mean[static_cast<size_t>(c)];
                inv_s[static_cast<size_t>(c)] =
                    1.0 / std::sqrt(stats.var[static_cast<size_t>(c)] + kBnEps);
            }
        }

        // BN + ReLU
        auto& xhat = cc.xhat[static_cast<size_t>(l)];
        xhat.assign(static_cast<size_t>(n) * C * L, 0.0);
        auto& out = cc.inputs[static_cast<size_t>(l) + 1];
        out.assign(static_cast<size_t>(n) * C * L, 0.0);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < C; ++c) {
                const size_t base = (static_cast<size_t>(i) * C + c) * L;
                const double mc = mu[static_cast<size_t>(c)];
                const double isc = inv_s[static_cast<size_t>(c)];
                const double g = gamma[static_cast<size_t>(c)];
                const double b = beta[static_cast<size_t>(c)];
                for (int t = 0; t < L; ++t) {
                    const double xh = (conv_out[base + t] - mc) * isc;
                    xhat[base + t] = xh;
                    const double y = g * xh + b;
                    out[base + t] = y > 0 ? y : 0.0;
                }
            }
    }

    // 1x1 scoring conv + sigmoid
    const auto sw = params.theta.view("score.w");
    const double sb = params.theta.view("score.b")[0];
    const std::vector<double>& top = cc.inputs[static_cast<size_t>(cfg.depth)];
    cc.logits.assign(static_cast<size_t>(n) * L, sb);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < C; ++c) {
            const double w = sw[static_cast<size_t>(c)];
            const double* row = top.data() + (static_cast<size_t>(i) * C + c) * L;
            double* out = cc.logits.data() + static_cast<size_t>(i) * L;
            for (int t = 0; t < L; ++t) out[t] += w * row[t];
        }

    std::vector<double> probs(cc.logits.size());
    for (size_t i = 0; i < probs.size(); ++i) {
        if (!std::isfinite(cc.logits[i])) throw NumericalError("forward: non-finite activation");
        probs[i] = sigmoid(cc.logits[i]);
    }
    return probs;
}

std::vector<double> forward_raw(ModelParams& params, const ConvNetConfig& cfg,
                                const SegmentBatch& batch, Mode mode) {
    ForwardCache cache;
    forward_batch(params, cfg, batch, mode, false, &cache);
    return cache.logits;
}

std::vector<double> forward(ModelParams& params, const ConvNetConfig& cfg,
                            std::span<const double> segment, Mode mode) {
    SegmentBatch batch;
    batch.n = 1;
    batch.len = static_cast<int>(segment.size());
    batch.x.assign(segment.begin(), segment.end());
    batch.y.assign(segment.size(), 0);
    batch.mask.assign(segment.size(), 1);
    return forward_batch(params, cfg, batch, mode);
}

std::vector<double> backward(ModelParams& params, const ConvNetConfig& cfg,
                             const SegmentBatch& batch, double* loss_out, bool update_running) {
    ForwardCache cache;
    const auto probs = forward_batch(params, cfg, batch, Mode::Train, update_running, &cache);
    if (loss_out) *loss_out = bce_loss(probs, batch.y, batch.mask);

    const int n = batch.n;
    const int L = batch.len;
    const int C = cfg.channels;
    const int K = cfg.kernel;
    const int pad = K / 2;
    const size_t M = count_unmasked(batch);

    std::vector<double> grad(params.theta.data.size(), 0.0);
    auto gview = [&](const std::string& name) {
        const TensorEntry& e = params.theta.entry(name);
        return std::span<double>(grad.data() + e.offset, e.size);
    };

    // d(bce)/d(logit) = (p - y) / M on unmasked samples
    std::vector<double> dlogits(probs.size(), 0.0);
    if (M > 0)
        for (size_t i = 0; i < probs.size(); ++i)
            if (batch.mask[i]) dlogits[i] = (probs[i] - static_cast<double>(batch.y[i])) /
                                            static_cast<double>(M);

    // scoring layer
    const auto sw = params.theta.view("score.w");
    auto dsw = gview("score.w");
    auto dsb = gview("score.b");
    const std::vector<double>& top = cache.inputs[static_cast<size_t>(cfg.depth)];
    std::vector<double> dcur(static_cast<size_t>(n) * C * L, 0.0);
    for (double d : dlogits) dsb[0] += d;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        double acc = 0;
        const double w = sw[static_cast<size_t>(c)];
        for (int i = 0; i < n; ++i) {
            const double* dl = dlogits.data() + static_cast<size_t>(i) * L;
            const size_t base = (static_cast<size_t>(i) * C + c) * L;
            for (int t = 0; t < L; ++t) {
                acc += dl[t] * top[base + t];
                dcur[base + t] = w * dl[t];
            }
        }
        dsw[static_cast<size_t>(c)] += acc;
    }

    const int Lp = L + 2 * pad;
    std::vector<double> padded;

    for (int l = cfg.depth - 1; l >= 0; --l) {
        const int in_ch = cfg.in_channels(l);
        const auto W = params.theta.view(conv_w(l));
        const auto gamma = params.theta.view(bn_g(l));
        auto dW = gview(conv_w(l));
        auto dB = gview(conv_b(l));
        auto dG = gview(bn_g(l));
        auto dBeta = gview(bn_b(l));

        const std::vector<double>& relu_out = cache.inputs[static_cast<size_t>(l) + 1];
        const std::vector<double>& xhat = cache.xhat[static_cast<size_t>(l)];
        const auto& inv_s = cache.inv_s[static_cast<size_t>(l)];

        // ReLU gate + batch-norm backward (batch-statistics path); each
        // channel's sums are owned by one loop index for determinism
        const double m = static_cast<double>(n) * L;
        std::vector<double> sum_dy(static_cast<size_t>(C), 0.0);
        std::vector<double> sum_dy_xhat(static_cast<size_t>(C), 0.0);
#pragma omp parallel for schedule(static)
        for (int c = 0; c < C; ++c) {
            double s = 0, sx = 0;
            for (int i = 0; i < n; ++i) {
                const size_t base = (static_cast<size_t>(i) * C + c) * L;
                for (int t = 0; t < L; ++t) {
                    if (relu_out[base + t] <= 0) dcur[base + t] = 0.0;
                    s += dcur[base + t];
                    sx += dcur[base + t] * xhat[base + t];
                }
            }
            sum_dy[static_cast<size_t>(c)] = s;
            sum_dy_xhat[static_cast<size_t>(c)] = sx;
            dG[static_cast<size_t>(c)] += sx;
            dBeta[static_cast<size_t>(c)] += s;
        }
        // dconv (reuse dcur buffer)
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < C; ++c) {
                const size_t base = (static_cast<size_t>(i) * C + c) * L;
                const double g = gamma[static_cast<size_t>(c)];
                const double isc = inv_s[static_cast<size_t>(c)];
                const double mean_dy = sum_dy[static_cast<size_t>(c)] / m;
                const double mean_dyx = sum_dy_xhat[static_cast<size_t>(c)] / m;
                for (int t = 0; t < L; ++t)
                    dcur[base + t] =
                        g * isc * (dcur[base + t] - mean_dy - xhat[base + t] * mean_dyx);
            }

        // conv backward
        const std::vector<double>& in = cache.inputs[static_cast<size_t>(l)];
        padded.assign(static_cast<size_t>(n) * in_ch * Lp, 0.0);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < in_ch; ++c)
                fill_padded(in.data() + (static_cast<size_t>(i) * in_ch + c) * L,
                            padded.data() + (static_cast<size_t>(i) * in_ch + c) * Lp, L, pad,
                            cfg.padding);

#pragma omp parallel for schedule(static)
        for (int o = 0; o < C; ++o) {
            double acc_b = 0;
            for (int i = 0; i < n; ++i) {
                const double* drow = dcur.data() + (static_cast<size_t>(i) * C + o) * L;
                for (int t = 0; t < L; ++t) acc_b += drow[t];
                for (int c = 0; c < in_ch; ++c) {
                    const double* src0 = padded.data() + (static_cast<size_t>(i) * in_ch + c) * Lp;
                    double* dwrow = dW.data() + (static_cast<size_t>(o) * in_ch + c) * K;
                    for (int k = 0; k < K; ++k) {
                        const double* src = src0 + k;
                        double acc = 0;
                        for (int t = 0; t < L; ++t) acc += drow[t] * src[t];
                        dwrow[k] += acc;
                    }
                }
            }
            dB[static_cast<size_t>(o)] += acc_b;
        }

        if (l > 0) {
            std::vector<double> dprev(static_cast<size_t>(n) * in_ch * L, 0.0);
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i) {
                std::vector<double> dpad(static_cast<size_t>(Lp));
                for (int c = 0; c < in_ch; ++c) {
                    std::fill(dpad.begin(), dpad.end(), 0.0);
                    for (int o = 0; o < C; ++o) {
                        const double* drow = dcur.data() + (static_cast<size_t>(i) * C + o) * L;
                        const double* wrow = W.data() + (static_cast<size_t>(o) * in_ch + c) * K;
                        for (int k = 0; k < K; ++k) {
                            double* dst = dpad.data() + k;
                            const double w = wrow[k];
                            for (int t = 0; t < L; ++t) dst[t] += w * drow[t];
                        }
                    }
                    double* dst = dprev.data() + (static_cast<size_t>(i) * in_ch + c) * L;
                    for (int t = 0; t < L; ++t) dst[t] += dpad[static_cast<size_t>(t + pad)];
                    if (cfg.padding == PadMode::Circular) {
                        for (int p = 0; p < pad; ++p) {
                            dst[L - pad + p] += dpad[static_cast<size_t>(p)];
                            dst[p] += dpad[static_cast<size_t>(pad + L + p)];
                        }
                    }
                }
            }
            dcur = std::move(dprev);
        }
    }

    for (double g : grad)
        if (!std::isfinite(g)) throw NumericalError("backward: non-finite gradient");
    return grad;
}

SubjectSegments record_to_subject(const EcgRecord& record, int label_halfwidth) {
    SubjectSegments subject;
    subject.subject = record.name;
    subject.segments = pre::segmentize(record, pre::kWindowSeconds, pre::kOverlapSeconds,
                                       label_halfwidth);
    for (auto& seg : subject.segments) pre::zscore_inplace(seg.values);
    return subject;
}

std::vector<FoldModel> train(const std::vector<SubjectSegments>& dataset, const TrainConfig& tc,
                             const ConvNetConfig& nc) {
    tc.validate();
    nc.validate();
    if (static_cast<int>(dataset.size()) < tc.folds)
        throw ArgumentError("train: need at least " + std::to_string(tc.folds) + " subjects, got " +
                            std::to_string(dataset.size()));

    // seeded subject-wise fold assignment
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 fold_rng(derive_seed(tc.seed, 0xF01D));
    std::shuffle(order.begin(), order.end(), fold_rng);
    std::vector<int> fold_of(dataset.size());
    for (size_t pos = 0; pos < order.size(); ++pos)
        fold_of[order[pos]] = static_cast<int>(pos % static_cast<size_t>(tc.folds));

    for (int fold = 0; fold < tc.folds; ++fold) {
        size_t train_segs = 0, val_segs = 0;
        for (size_t s = 0; s < dataset.size(); ++s)
            (fold_of[s] == fold ? val_segs : train_segs) += dataset[s].segments.size();
        if (train_segs == 0 || val_segs == 0)
            throw ArgumentError("train: fold " + std::to_string(fold) + " has an empty split");
    }

    std::vector<FoldModel> models(static_cast<size_t>(tc.folds));
    std::exception_ptr failure;
    // folds are independent trainings; run them concurrently
#pragma omp parallel for schedule(dynamic)
    for (int fold = 0; fold < tc.folds; ++fold) {
        try {
        std::vector<const pre::Segment*> train_segs;
        std::vector<const pre::Segment*> val_segs;
        FoldModel fm;
        for (size_t s = 0; s < dataset.size(); ++s) {
            auto& dst = fold_of[s] == fold ? val_segs : train_segs;
            for (const auto& seg : dataset[s].segments) dst.push_back(&seg);
            if (fold_of[s] == fold) fm.val_subjects.push_back(dataset[s].subject);
        }

        const uint64_t fold_seed = derive_seed(tc.seed, static_cast<uint64_t>(fold) + 1);
        fm.params = init_params(nc, fold_seed);
        ModelParams best = fm.params;

        AdamState adam;
        double lr = tc.lr0;
        PlateauScheduler sched{tc.improve_eps, tc.scheduler_patience, tc.early_stop_patience,
                               tc.scheduler_factor};

        for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
            std::mt19937_64 epoch_rng(derive_seed(fold_seed, 0xE000 + static_cast<uint64_t>(epoch)));
            std::shuffle(train_segs.begin(), train_segs.end(), epoch_rng);

            const double epoch_lr = lr;
            double train_sum = 0;
            size_t train_count = 0;
            for (size_t at = 0; at < train_segs.size(); at += static_cast<size_t>(tc.batch_size)) {
                const size_t take = std::min(train_segs.size() - at,
                                             static_cast<size_t>(tc.batch_size));
                auto batch = SegmentBatch::from_segments(
                    std::span<const pre::Segment* const>(train_segs.data() + at, take));
                double loss = 0;
                const auto grads = backward(fm.params, nc, batch, &loss, /*update_running=*/true);
                adam.step(fm.params.theta.data, grads, epoch_lr);
                const size_t cnt = count_unmasked(batch);
                train_sum += loss * static_cast<double>(cnt);
                train_count += cnt;
            }

            double val_sum = 0;
            size_t val_count = 0;
            for (size_t at = 0; at < val_segs.size(); at += static_cast<size_t>(tc.batch_size)) {
                const size_t take = std::min(val_segs.size() - at,
                                             static_cast<size_t>(tc.batch_size));
                auto batch = SegmentBatch::from_segments(
                    std::span<const pre::Segment* const>(val_segs.data() + at, take));
                const auto probs = forward_batch(fm.params, nc, batch, Mode::Infer);
                const size_t cnt = count_unmasked(batch);
                val_sum += bce_loss(probs, batch.y, batch.mask) * static_cast<double>(cnt);
                val_count += cnt;
            }
            const double train_loss = train_count ? train_sum / static_cast<double>(train_count) : 0;
            const double val_loss = val_count ? val_sum / static_cast<double>(val_count) : 0;
            fm.history.epochs.push_back({epoch, train_loss, val_loss, epoch_lr});

            const auto update = sched.observe(val_loss, lr);
            if (update.improved) {
                best = fm.params;
                fm.history.best_epoch = epoch;
                fm.history.best_val = val_loss;
            }
            if (update.stop) break;
        }

        fm.params = std::move(best);
        models[static_cast<size_t>(fold)] = std::move(fm);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return models;
}

PredictionStream predict_stream(ModelParams& params, const ConvNetConfig& cfg,
                                const EcgRecord& record) {
    auto segments = pre::segmentize(record);
    std::vector<pre::WindowPrediction> windows;
    windows.reserve(segments.size());

    constexpr size_t kChunk = 64;
    for (size_t at = 0; at < segments.size(); at += kChunk) {
        const size_t take = std::min(segments.size() - at, kChunk);
        std::vector<const pre::Segment*> ptrs;
        std::vector<pre::Segment> normalized(segments.begin() + static_cast<ptrdiff_t>(at),
                                             segments.begin() + static_cast<ptrdiff_t>(at + take));
        for (auto& seg : normalized) {
            pre::zscore_inplace(seg.values);
            ptrs.push_back(&seg);
        }
        auto batch = SegmentBatch::from_segments(ptrs);
        const auto probs = forward_batch(params, cfg, batch, Mode::Infer);
        for (size_t s = 0; s < take; ++s) {
            pre::WindowPrediction wp;
            wp.start = normalized[s].start;
            wp.valid = normalized[s].valid;
            wp.bits.assign(static_cast<size_t>(batch.len), 0);
            for (int t = 0; t < batch.len; ++t)
                wp.bits[static_cast<size_t>(t)] =
                    probs[s * static_cast<size_t>(batch.len) + static_cast<size_t>(t)] >
                            cfg.threshold
                        ? 1
                        : 0;
            windows.push_back(std::move(wp));
        }
    }
    return pre::aggregate_or(windows, record.n_samples());
}

} // namespace qrs::nn
