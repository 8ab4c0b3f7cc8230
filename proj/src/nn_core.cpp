#include "qrs/nn_core.hpp"

#include <algorithm>
#include <cmath>

#include "qrs/errors.hpp"

namespace qrs::nn {

size_t FlatParams::add(std::string name, std::vector<int64_t> shape) {
    size_t size = 1;
    for (int64_t d : shape) size *= static_cast<size_t>(d);
    const size_t offset = data.size();
    data.resize(offset + size, 0.0);
    entries.push_back({std::move(name), offset, size, std::move(shape)});
    return offset;
}

std::span<double> FlatParams::view(std::string_view name) {
    const TensorEntry& e = entry(name);
    return {data.data() + e.offset, e.size};
}

std::span<const double> FlatParams::view(std::string_view name) const {
    const TensorEntry& e = entry(name);
    return {data.data() + e.offset, e.size};
}

const TensorEntry& FlatParams::entry(std::string_view name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw ArgumentError("no parameter tensor named '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (lr0 <= 0) throw ArgumentError("train config: lr0 must be positive");
    if (scheduler_factor <= 0 || scheduler_factor >= 1)
        throw ArgumentError("train config: scheduler_factor must be in (0, 1)");
    if (early_stop_patience <= scheduler_patience)
        throw ArgumentError("train config: early_stop_patience must exceed scheduler_patience");
    if (max_epochs < 1) throw ArgumentError("train config: max_epochs must be >= 1");
    if (batch_size < 1) throw ArgumentError("train config: batch_size must be >= 1");
    if (folds < 2) throw ArgumentError("train config: folds must be >= 2");
}

PlateauScheduler::Update PlateauScheduler::observe(double val_loss, double& lr) {
    Update u;
    if (best - val_loss >= eps) {
        best = val_loss;
        sched_count = 0;
        stop_count = 0;
        u.improved = true;
        return u;
    }
    ++sched_count;
    ++stop_count;
    if (sched_count >= sched_patience) {
        lr *= factor;
        sched_count = 0;
        u.reduced = true;
    }
    if (stop_count >= stop_patience) u.stop = true;
    return u;
}

void AdamState::step(std::vector<double>& params, std::span<const double> grads, double lr) {
    if (m.size() != params.size()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
        t = 0;
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

double bce_loss(std::span<const double> probs, std::span<const uint8_t> labels,
                std::span<const uint8_t> mask) {
    if (probs.size() != labels.size() || (!mask.empty() && mask.size() != probs.size()))
        throw ArgumentError("bce_loss: length mismatch");
    double sum = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        const double p = std::clamp(probs[i], 1e-7, 1.0 - 1e-7);
        sum += labels[i] ? -std::log(p) : -std::log(1.0 - p);
        ++count;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::vector<uint8_t> predict_binary(std::span<const double> probs, double threshold) {
    std::vector<uint8_t> bits(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) bits[i] = probs[i] > threshold ? 1 : 0;
    return bits;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

uint64_t derive_seed(uint64_t seed, uint64_t tag) {
    uint64_t z = seed ^ (tag * 0x9E3779B97F4A7C15ULL);
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace qrs::nn
