#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qrs::nn {

struct TensorEntry {
    std::string name;
    size_t offset = 0;
    size_t size = 0;
    std::vector<int64_t> shape;
};

// All trainables of a model in one contiguous buffer with named views; keeps
// the optimizer, serialization and finite-difference checks uniform.
struct FlatParams {
    std::vector<double> data;
    std::vector<TensorEntry> entries;

    size_t add(std::string name, std::vector<int64_t> shape);
    std::span<double> view(std::string_view name);
    std::span<const double> view(std::string_view name) const;
    const TensorEntry& entry(std::string_view name) const;
};

enum class Mode { Train, Infer };

struct TrainConfig {
    double lr0 = 0.01;
    int scheduler_patience = 5;
    double scheduler_factor = 0.1;
    int early_stop_patience = 7;
    int max_epochs = 100;
    int batch_size = 64;
    uint64_t seed = 0;
    int folds = 5;
    double improve_eps = 1e-6; // "improved" = best - loss >= this

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
};

// Validation-loss plateau bookkeeping shared by both trainers: LR is scaled
// by `factor` after `sched_patience` epochs without improvement, training
// stops after `stop_patience`; both counters reset on improvement.
struct PlateauScheduler {
    double eps;
    int sched_patience;
    int stop_patience;
    double factor;

    double best = std::numeric_limits<double>::infinity();
    int sched_count = 0;
    int stop_count = 0;

    struct Update {
        bool improved = false;
        bool reduced = false;
        bool stop = false;
    };

    Update observe(double val_loss, double& lr);
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;
    std::vector<double> m, v;

    void step(std::vector<double>& params, std::span<const double> grads, double lr);
};

// Mean over unmasked samples of -[y log p + (1-y) log(1-p)], p clamped to
// [1e-7, 1-1e-7]; 0 when everything is masked.
double bce_loss(std::span<const double> probs, std::span<const uint8_t> labels,
                std::span<const uint8_t> mask);

std::vector<uint8_t> predict_binary(std::span<const double> probs, double threshold = 0.5);

double sigmoid(double x);

// Deterministic per-purpose seed derivation (splitmix64 over seed ^ tag).
uint64_t derive_seed(uint64_t seed, uint64_t tag);

} // namespace qrs::nn
