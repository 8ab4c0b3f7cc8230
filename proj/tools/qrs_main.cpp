// qrs: QRS detection pipeline driver.
//
// Subcommands cover the whole workflow: WFDB conversion, synthetic corpus
// generation, CNN and GRU training, single-record prediction, cross-database
// evaluation and the GRU hyperparameter grid sweep. Every command accepts
// --config <file> (JSON, keyed by subcommand) whose values become defaults;
// explicit flags win. Outputs carry a manifest with the config hash and seed
// so reruns are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qrs/convnet.hpp"
#include "qrs/errors.hpp"
#include "qrs/eval.hpp"
#include "qrs/gru.hpp"
#include "qrs/io.hpp"
#include "qrs/postprocess.hpp"
#include "qrs/preprocess.hpp"
#include "qrs/synth.hpp"
#include "qrs/wfdb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMissingInput = 2;
constexpr int kExitUnsupported = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitConfig = 5;

// Pre-scan argv for --config and return the section for this subcommand;
// section values are installed as option defaults before CLI11 parses, so
// command-line flags override file values.
json config_section(int argc, char** argv, const std::string& command) {
    std::string path;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") path = argv[i + 1];
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw qrs::MissingInput("config file not found: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw qrs::ConfigError(std::string("config: ") + e.what());
    }
    if (!j.contains(command)) return json::object();
    if (!j[command].is_object()) throw qrs::ConfigError("config: section '" + command + "' must be an object");
    return j[command];
}

template <typename T>
void apply_default(const json& section, const std::string& key, T& var) {
    if (!section.contains(key)) return;
    try {
        var = section.at(key).get<T>();
    } catch (const json::exception& e) {
        throw qrs::ConfigError("config key '" + key + "': " + e.what());
    }
}

void write_manifest(const fs::path& path, const std::string& command, uint64_t seed,
                    const json& config) {
    json j;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    j["config_hash"] = qrs::io::config_hash(config.dump());
    std::ofstream out(path);
    if (!out) throw qrs::ConfigError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
}

// "name=dir" or plain dir (name = directory basename)
std::pair<std::string, fs::path> parse_database_arg(const std::string& arg) {
    const auto eq = arg.find('=');
    if (eq != std::string::npos) return {arg.substr(0, eq), arg.substr(eq + 1)};
    fs::path p(arg);
    std::string name = p.filename().string();
    if (name.empty()) name = p.parent_path().filename().string();
    return {name, p};
}

std::vector<qrs::eval::Database> load_databases(const std::vector<std::string>& args) {
    std::vector<qrs::eval::Database> dbs;
    for (const auto& arg : args) {
        auto [name, dir] = parse_database_arg(arg);
        qrs::eval::Database db;
        db.name = name;
        db.records = qrs::io::load_record_dir(dir);
        if (db.records.empty())
            throw qrs::MissingInput("database '" + name + "' has no record containers in " +
                                    dir.string());
        dbs.push_back(std::move(db));
    }
    return dbs;
}

struct LoadedModels {
    // depth -> fold models, folds sorted by filename
    std::map<int, std::vector<std::pair<qrs::nn::ModelParams, qrs::nn::ConvNetConfig>>> by_depth;
};

LoadedModels load_cnn_models(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw qrs::MissingInput("model directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    LoadedModels out;
    for (const auto& f : files) {
        json j;
        {
            std::ifstream in(f);
            try {
                in >> j;
            } catch (const json::exception&) {
                continue;
            }
        }
        if (j.value("kind", "") != "convnet") continue;
        auto loaded = qrs::io::load_convnet(f);
        out.by_depth[loaded.second.depth].push_back(std::move(loaded));
    }
    if (out.by_depth.empty())
        throw qrs::MissingInput("no convnet models found in " + dir.string());
    return out;
}

int cmd_convert(int argc, char** argv) {
    CLI::App app{"Convert a WFDB record to the portable container"};
    app.allow_extras();
    std::string config_path, record_prefix, out_dir, beat_set = qrs::wfdb::default_beat_set();
    bool exclude_paced = false;
    double target_hz = 100.0;
    const json section = config_section(argc, argv, "convert");
    apply_default(section, "record", record_prefix);
    apply_default(section, "out", out_dir);
    apply_default(section, "beat_set", beat_set);
    apply_default(section, "exclude_paced", exclude_paced);
    apply_default(section, "target_hz", target_hz);

    app.add_option("--config", config_path);
    app.add_option("--record", record_prefix, "record path prefix (without .hea)")
        ->required(record_prefix.empty());
    app.add_option("--out", out_dir, "output directory")->required(out_dir.empty());
    app.add_option("--beat-set", beat_set, "valid beat mnemonics");
    app.add_flag("--exclude-paced", exclude_paced, "drop '/' from the beat set");
    app.add_option("--target-hz", target_hz);
    CLI11_PARSE(app, argc, argv);

    std::string set = beat_set;
    if (exclude_paced) set.erase(std::remove(set.begin(), set.end(), '/'), set.end());

    const auto record = qrs::wfdb::load_record(record_prefix, set, target_hz);
    qrs::io::save_record_container(record, out_dir);
    if (record.annotation_collisions > 0)
        std::cerr << "note: " << record.annotation_collisions
                  << " annotation(s) collided during resampling (first kept)\n";
    std::cout << "wrote " << (fs::path(out_dir) / (record.name + ".json")).string() << " ("
              << record.n_samples() << " samples, " << record.annotations.size() << " beats)\n";
    return kExitOk;
}

int cmd_synth(int argc, char** argv) {
    CLI::App app{"Generate a synthetic ECG corpus"};
    std::string config_path, out_dir;
    int subjects = 20;
    uint64_t seed = 1;
    double duration = 60.0, variability = 0.15;
    qrs::synth::SynthSpec base;
    base.noise_sigma = 0.15;
    base.baseline_wander_amp = 0.15;
    base.hr_jitter = 0.06;
    base.amp_jitter = 0.1;

    const json section = config_section(argc, argv, "synth");
    apply_default(section, "out", out_dir);
    apply_default(section, "subjects", subjects);
    apply_default(section, "seed", seed);
    apply_default(section, "duration_s", duration);
    apply_default(section, "variability", variability);
    apply_default(section, "mean_hr_bpm", base.mean_hr_bpm);
    apply_default(section, "hr_jitter", base.hr_jitter);
    apply_default(section, "qrs_amp", base.qrs_amp);
    apply_default(section, "qrs_width_ms", base.qrs_width_ms);
    apply_default(section, "p_t_amp", base.p_t_amp);
    apply_default(section, "noise_sigma", base.noise_sigma);
    apply_default(section, "baseline_wander_amp", base.baseline_wander_amp);
    apply_default(section, "amp_jitter", base.amp_jitter);

    app.add_option("--config", config_path);
    app.add_option("--out", out_dir)->required(out_dir.empty());
    app.add_option("--subjects", subjects);
    app.add_option("--seed", seed);
    app.add_option("--duration", duration, "seconds per subject");
    app.add_option("--variability", variability, "relative per-subject morphology spread");
    app.add_option("--hr", base.mean_hr_bpm);
    app.add_option("--hr-jitter", base.hr_jitter);
    app.add_option("--qrs-amp", base.qrs_amp);
    app.add_option("--qrs-width-ms", base.qrs_width_ms);
    app.add_option("--pt-amp", base.p_t_amp);
    app.add_option("--noise-sigma", base.noise_sigma);
    app.add_option("--wander-amp", base.baseline_wander_amp);
    app.add_option("--amp-jitter", base.amp_jitter);
    CLI11_PARSE(app, argc, argv);

    base.duration_s = duration;
    json config = {{"subjects", subjects},       {"seed", seed},
                   {"duration_s", duration},     {"variability", variability},
                   {"mean_hr_bpm", base.mean_hr_bpm}, {"hr_jitter", base.hr_jitter},
                   {"qrs_amp", base.qrs_amp},    {"qrs_width_ms", base.qrs_width_ms},
                   {"p_t_amp", base.p_t_amp},    {"noise_sigma", base.noise_sigma},
                   {"baseline_wander_amp", base.baseline_wander_amp},
                   {"amp_jitter", base.amp_jitter}};

    fs::create_directories(out_dir);
    for (int s = 0; s < subjects; ++s) {
        qrs::synth::SynthSpec spec = base;
        spec.seed = qrs::nn::derive_seed(seed, 0x5EED0000ULL + static_cast<uint64_t>(s));
        if (variability > 0) {
            std::mt19937_64 vary(qrs::nn::derive_seed(seed, 0x7A110000ULL + static_cast<uint64_t>(s)));
            std::uniform_real_distribution<double> u(-variability, variability);
            spec.mean_hr_bpm = std::clamp(base.mean_hr_bpm * (1 + u(vary)), 40.0, 180.0);
            spec.qrs_width_ms = base.qrs_width_ms * (1 + u(vary));
            spec.qrs_amp = base.qrs_amp * (1 + u(vary));
            spec.noise_sigma = base.noise_sigma * (1 + u(vary));
        }
        auto ecg = qrs::synth::gen_ecg(spec);
        char name[16];
        std::snprintf(name, sizeof(name), "s%02d", s);
        ecg.record.name = name;
        qrs::io::save_record_container(ecg.record, out_dir);
    }
    write_manifest(fs::path(out_dir) / "manifest_synth.json", "synth", seed, config);
    std::cout << "wrote " << subjects << " records to " << out_dir << "\n";
    return kExitOk;
}

int cmd_train_cnn(int argc, char** argv) {
    CLI::App app{"Train the five-fold CNN"};
    std::string config_path, data_dir, out_dir;
    qrs::nn::ConvNetConfig nc;
    qrs::nn::TrainConfig tc;
    int label_halfwidth = qrs::pre::kLabelHalfWidth;

    const json section = config_section(argc, argv, "train_cnn");
    apply_default(section, "data", data_dir);
    apply_default(section, "out", out_dir);
    apply_default(section, "label_halfwidth", label_halfwidth);
    apply_default(section, "depth", nc.depth);
    apply_default(section, "channels", nc.channels);
    apply_default(section, "kernel", nc.kernel);
    apply_default(section, "threshold", nc.threshold);
    apply_default(section, "lr", tc.lr0);
    apply_default(section, "batch_size", tc.batch_size);
    apply_default(section, "max_epochs", tc.max_epochs);
    apply_default(section, "folds", tc.folds);
    apply_default(section, "seed", tc.seed);
    apply_default(section, "scheduler_patience", tc.scheduler_patience);
    apply_default(section, "early_stop_patience", tc.early_stop_patience);

    app.add_option("--config", config_path);
    app.add_option("--data", data_dir)->required(data_dir.empty());
    app.add_option("--out", out_dir)->required(out_dir.empty());
    app.add_option("--depth", nc.depth);
    app.add_option("--channels", nc.channels);
    app.add_option("--kernel", nc.kernel);
    app.add_option("--threshold", nc.threshold);
    app.add_option("--lr", tc.lr0);
    app.add_option("--batch", tc.batch_size);
    app.add_option("--max-epochs", tc.max_epochs);
    app.add_option("--folds", tc.folds);
    app.add_option("--seed", tc.seed);
    app.add_option("--scheduler-patience", tc.scheduler_patience);
    app.add_option("--early-stop", tc.early_stop_patience);
    app.add_option("--label-halfwidth", label_halfwidth, "label samples each side of a beat");
    CLI11_PARSE(app, argc, argv);

    const auto records = qrs::io::load_record_dir(data_dir);
    if (records.empty()) throw qrs::MissingInput("no records in " + data_dir);
    std::vector<qrs::nn::SubjectSegments> dataset;
    dataset.reserve(records.size());
    for (const auto& rec : records)
        dataset.push_back(qrs::nn::record_to_subject(rec, label_halfwidth));

    const auto models = qrs::nn::train(dataset, tc, nc);

    fs::create_directories(out_dir);
    json config = {{"depth", nc.depth},         {"channels", nc.channels},
                   {"kernel", nc.kernel},       {"threshold", nc.threshold},
                   {"lr", tc.lr0},              {"batch_size", tc.batch_size},
                   {"max_epochs", tc.max_epochs}, {"folds", tc.folds},
                   {"seed", tc.seed},           {"label_halfwidth", label_halfwidth}};
    json folds = json::array();
    for (size_t m = 0; m < models.size(); ++m) {
        char stem[48];
        std::snprintf(stem, sizeof(stem), "cnn_d%d_fold%zu", nc.depth, m);
        qrs::io::save_convnet(models[m].params, nc, tc.seed, fs::path(out_dir) / stem);
        char hist[48];
        std::snprintf(hist, sizeof(hist), "history_d%d_fold%zu.csv", nc.depth, m);
        qrs::io::save_history_csv(models[m].history, fs::path(out_dir) / hist);
        folds.push_back({{"fold", m},
                         {"val_subjects", models[m].val_subjects},
                         {"best_epoch", models[m].history.best_epoch},
                         {"best_val_loss", models[m].history.best_val}});
        std::cout << "fold " << m << ": best val loss " << models[m].history.best_val
                  << " at epoch " << models[m].history.best_epoch << " ("
                  << models[m].history.epochs.size() << " epochs)\n";
    }
    json manifest_cfg = config;
    manifest_cfg["folds"] = folds;
    char mname[48];
    std::snprintf(mname, sizeof(mname), "manifest_train_cnn_d%d.json", nc.depth);
    write_manifest(fs::path(out_dir) / mname, "train_cnn", tc.seed, manifest_cfg);
    return kExitOk;
}

// depth-2 fold models predict each record; streams optionally corrupted
std::vector<qrs::gru::StreamPair> build_gru_corpus(
    std::vector<std::pair<qrs::nn::ModelParams, qrs::nn::ConvNetConfig>>& models,
    const std::vector<qrs::EcgRecord>& records, const qrs::synth::CorruptionSpec& corr,
    int label_halfwidth) {
    std::vector<qrs::gru::StreamPair> streams;
    uint64_t salt = 0;
    for (const auto& rec : records) {
        const auto labels = qrs::pre::make_label_stream(rec, label_halfwidth);
        for (auto& [params, cfg] : models) {
            qrs::gru::StreamPair sp;
            sp.input = qrs::nn::predict_stream(params, cfg, rec);
            if (corr.flip_prob > 0 || corr.dropout_prob > 0 || corr.spur_prob > 0) {
                qrs::synth::CorruptionSpec seeded = corr;
                seeded.seed = qrs::nn::derive_seed(corr.seed, salt++);
                sp.input = qrs::synth::corrupt(sp.input, seeded);
            }
            sp.target = labels;
            streams.push_back(std::move(sp));
        }
    }
    return streams;
}

int cmd_train_gru(int argc, char** argv) {
    CLI::App app{"Train the GRU post-processor on CNN prediction streams"};
    std::string config_path, data_dir, models_dir, out_stem;
    int cnn_depth = 2;
    qrs::gru::GruConfig gc;
    qrs::nn::TrainConfig tc = qrs::gru::default_gru_train_config();
    qrs::synth::CorruptionSpec corr;
    int label_halfwidth = qrs::pre::kLabelHalfWidth;

    const json section = config_section(argc, argv, "train_gru");
    apply_default(section, "label_halfwidth", label_halfwidth);
    apply_default(section, "data", data_dir);
    apply_default(section, "cnn_models", models_dir);
    apply_default(section, "out", out_stem);
    apply_default(section, "cnn_depth", cnn_depth);
    apply_default(section, "layers", gc.hidden_layers);
    apply_default(section, "seq_len_s", gc.seq_len_s);
    apply_default(section, "hidden", gc.hidden_size);
    apply_default(section, "threshold", gc.threshold);
    apply_default(section, "lr", tc.lr0);
    apply_default(section, "batch_size", tc.batch_size);
    apply_default(section, "max_epochs", tc.max_epochs);
    apply_default(section, "seed", tc.seed);
    apply_default(section, "flip_prob", corr.flip_prob);
    apply_default(section, "dropout_prob", corr.dropout_prob);
    apply_default(section, "spur_prob", corr.spur_prob);

    app.add_option("--config", config_path);
    app.add_option("--data", data_dir, "noisy training database (containers)")
        ->required(data_dir.empty());
    app.add_option("--cnn-models", models_dir)->required(models_dir.empty());
    app.add_option("--out", out_stem, "output model stem")->required(out_stem.empty());
    app.add_option("--cnn-depth", cnn_depth, "CNN depth whose streams feed the GRU");
    app.add_option("--layers", gc.hidden_layers);
    app.add_option("--seq-len", gc.seq_len_s, "sequence length in seconds");
    app.add_option("--hidden", gc.hidden_size);
    app.add_option("--threshold", gc.threshold);
    app.add_option("--lr", tc.lr0);
    app.add_option("--batch", tc.batch_size);
    app.add_option("--max-epochs", tc.max_epochs);
    app.add_option("--seed", tc.seed);
    app.add_option("--flip-prob", corr.flip_prob, "extra corruption on the training streams");
    app.add_option("--dropout-prob", corr.dropout_prob);
    app.add_option("--spur-prob", corr.spur_prob);
    app.add_option("--label-halfwidth", label_halfwidth);
    CLI11_PARSE(app, argc, argv);

    auto loaded = load_cnn_models(models_dir);
    auto it = loaded.by_depth.find(cnn_depth);
    if (it == loaded.by_depth.end())
        throw qrs::MissingInput("no depth-" + std::to_string(cnn_depth) + " CNN models in " +
                                models_dir);

    const auto records = qrs::io::load_record_dir(data_dir);
    corr.seed = qrs::nn::derive_seed(tc.seed, 0xC0DE);
    const auto streams = build_gru_corpus(it->second, records, corr, label_halfwidth);

    const auto result = qrs::gru::train_gru(streams, gc, tc);
    const fs::path stem(out_stem);
    if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
    qrs::io::save_gru(result.params, gc, tc.seed, stem);
    fs::path hist = stem;
    hist += "_history.csv";
    qrs::io::save_history_csv(result.history, hist);

    json config = {{"cnn_depth", cnn_depth},   {"layers", gc.hidden_layers},
                   {"seq_len_s", gc.seq_len_s}, {"hidden", gc.hidden_size},
                   {"lr", tc.lr0},             {"batch_size", tc.batch_size},
                   {"max_epochs", tc.max_epochs}, {"seed", tc.seed},
                   {"flip_prob", corr.flip_prob}, {"dropout_prob", corr.dropout_prob},
                   {"spur_prob", corr.spur_prob}};
    fs::path manifest = stem;
    manifest += "_manifest.json";
    write_manifest(manifest, "train_gru", tc.seed, config);
    std::cout << "gru: best val loss " << result.history.best_val << " at epoch "
              << result.history.best_epoch << " (" << result.history.epochs.size()
              << " epochs)\n";
    return kExitOk;
}

int cmd_predict(int argc, char** argv) {
    CLI::App app{"Run one record through a CNN model (and optional post-processing)"};
    std::string config_path, model_path, record_path, path_name;
    std::string out_stream, out_peaks, out_nodes, gru_model;
    bool strict_support = false;
    double threshold = -1;

    const json section = config_section(argc, argv, "predict");
    apply_default(section, "model", model_path);
    apply_default(section, "record", record_path);
    apply_default(section, "path", path_name);
    apply_default(section, "out_stream", out_stream);
    apply_default(section, "out_peaks", out_peaks);
    apply_default(section, "out_nodes", out_nodes);
    apply_default(section, "gru_model", gru_model);
    apply_default(section, "strict_support", strict_support);

    app.add_option("--config", config_path);
    app.add_option("--model", model_path, "CNN model .json")->required(model_path.empty());
    app.add_option("--record", record_path, "record container .json")->required(record_path.empty());
    app.add_option("--path", path_name, "salt|moderate|advanced|gru (omit for the raw stream)");
    app.add_option("--gru-model", gru_model);
    app.add_option("--out-stream", out_stream, "write the binary stream as 0/1 text");
    app.add_option("--out-peaks", out_peaks, "write peak indices, one per line");
    app.add_option("--out-nodes", out_nodes, "write surviving nodes as CSV");
    app.add_option("--threshold", threshold, "override the model threshold");
    app.add_flag("--strict-support", strict_support);
    CLI11_PARSE(app, argc, argv);

    auto [params, cfg] = qrs::io::load_convnet(model_path);
    if (threshold >= 0) cfg.threshold = threshold;
    const auto record = qrs::io::load_record_container(record_path);
    const auto stream = qrs::nn::predict_stream(params, cfg, record);

    if (!out_stream.empty()) {
        std::ofstream out(out_stream);
        for (uint8_t b : stream) out << (b ? '1' : '0');
        out << "\n";
    }

    if (!path_name.empty()) {
        const auto path = qrs::post::parse_path(path_name);
        std::vector<uint8_t> bits(stream.begin(), stream.end());
        if (path == qrs::post::Path::Gru) {
            if (gru_model.empty()) throw qrs::ConfigError("path=gru requires --gru-model");
            auto [gparams, gcfg] = qrs::io::load_gru(gru_model);
            bits = qrs::gru::repair_stream(gparams, gcfg, bits);
        }
        const auto derivative = qrs::post::first_derivative(record.signal);
        const auto nodes = qrs::post::apply_rules(path, bits, derivative, strict_support);
        if (!out_nodes.empty()) qrs::io::save_nodes_csv(nodes, derivative, out_nodes);
        const auto peaks = qrs::post::localize(nodes);
        if (!out_peaks.empty()) qrs::io::save_peaks_text(peaks, out_peaks);
        std::cout << record.name << ": " << peaks.size() << " peaks via " << path_name << "\n";
    } else {
        int64_t ones = 0;
        for (uint8_t b : stream) ones += b;
        std::cout << record.name << ": raw stream with " << ones << " positive samples\n";
    }
    return kExitOk;
}

int cmd_evaluate(int argc, char** argv) {
    CLI::App app{"Cross-database evaluation of trained models"};
    std::string config_path, models_dir, path_name = "advanced", gru_model, out_dir = ".";
    std::vector<std::string> data_args;
    double tol_ms = 150.0;
    int depth = 0;
    bool sweep_depth = false, strict_support = false, macro = false;

    const json section = config_section(argc, argv, "evaluate");
    apply_default(section, "models", models_dir);
    apply_default(section, "data", data_args);
    apply_default(section, "path", path_name);
    apply_default(section, "gru_model", gru_model);
    apply_default(section, "out", out_dir);
    apply_default(section, "tol_ms", tol_ms);
    apply_default(section, "depth", depth);
    apply_default(section, "sweep_depth", sweep_depth);
    apply_default(section, "strict_support", strict_support);
    apply_default(section, "macro", macro);

    app.add_option("--config", config_path);
    app.add_option("--models", models_dir)->required(models_dir.empty());
    app.add_option("--data", data_args, "database dir or name=dir (repeatable)")
        ->required(data_args.empty());
    app.add_option("--path", path_name, "salt|moderate|advanced|gru");
    app.add_option("--gru-model", gru_model);
    app.add_option("--out", out_dir);
    app.add_option("--tol-ms", tol_ms, "beat matching tolerance in milliseconds");
    app.add_option("--depth", depth, "evaluate only this depth");
    app.add_flag("--sweep-depth", sweep_depth, "evaluate every depth found in --models");
    app.add_flag("--strict-support", strict_support);
    app.add_flag("--macro", macro, "average per-record F1 instead of pooling counts");
    CLI11_PARSE(app, argc, argv);

    qrs::eval::EvalOptions options;
    options.path = qrs::post::parse_path(path_name);
    options.tol = static_cast<int64_t>(std::llround(tol_ms * qrs::kPipelineHz / 1000.0));
    options.strict_support = strict_support;
    options.macro = macro;

    std::optional<std::pair<qrs::gru::GruParams, qrs::gru::GruConfig>> gru_loaded;
    if (options.path == qrs::post::Path::Gru) {
        if (gru_model.empty()) throw qrs::ConfigError("path=gru requires --gru-model");
        gru_loaded = qrs::io::load_gru(gru_model);
    }

    auto loaded = load_cnn_models(models_dir);
    std::vector<int> depths;
    if (sweep_depth) {
        for (const auto& [d, _] : loaded.by_depth) depths.push_back(d);
    } else if (depth > 0) {
        if (!loaded.by_depth.count(depth))
            throw qrs::MissingInput("no depth-" + std::to_string(depth) + " models in " + models_dir);
        depths.push_back(depth);
    } else if (loaded.by_depth.size() == 1) {
        depths.push_back(loaded.by_depth.begin()->first);
    } else {
        throw qrs::ConfigError("multiple depths present; pass --depth or --sweep-depth");
    }

    const auto databases = load_databases(data_args);

    qrs::eval::EvalReport combined;
    combined.tol = options.tol;
    combined.macro = macro;
    for (int d : depths) {
        auto& models = loaded.by_depth.at(d);
        std::vector<qrs::nn::FoldModel> fold_models(models.size());
        for (size_t m = 0; m < models.size(); ++m) fold_models[m].params = models[m].first;
        qrs::nn::ConvNetConfig net_cfg = models.front().second;
        const auto report = qrs::eval::cross_validate(
            fold_models, net_cfg, databases, options,
            gru_loaded ? &gru_loaded->first : nullptr, gru_loaded ? &gru_loaded->second : nullptr);
        for (const auto& row : report.rows) combined.rows.push_back(row);
    }

    fs::create_directories(out_dir);
    qrs::io::save_report_json(combined, fs::path(out_dir) / "report.json");
    qrs::io::save_report_csv(combined, fs::path(out_dir) / "report.csv");

    json config = {{"path", path_name}, {"tol_ms", tol_ms},   {"depths", depths},
                   {"macro", macro},    {"strict_support", strict_support}};
    write_manifest(fs::path(out_dir) / "manifest_evaluate.json", "evaluate", 0, config);

    for (const auto& row : combined.rows)
        std::cout << row.database << " depth=" << row.depth << " path=" << row.path
                  << " F1=" << row.mean_f1 << " +- " << row.std_f1 << "\n";
    return kExitOk;
}

int cmd_sweep_gru_grid(int argc, char** argv) {
    CLI::App app{"Train and score the GRU grid: {1,2} layers x {1..5} s sequences"};
    std::string config_path, data_dir, models_dir, out_csv;
    std::vector<std::string> eval_args;
    int cnn_depth = 2, hidden = 32;
    int label_halfwidth = qrs::pre::kLabelHalfWidth;
    double tol_ms = 150.0;
    qrs::nn::TrainConfig tc = qrs::gru::default_gru_train_config();
    qrs::synth::CorruptionSpec corr;

    const json section = config_section(argc, argv, "sweep_gru_grid");
    apply_default(section, "label_halfwidth", label_halfwidth);
    apply_default(section, "data", data_dir);
    apply_default(section, "eval_data", eval_args);
    apply_default(section, "cnn_models", models_dir);
    apply_default(section, "out", out_csv);
    apply_default(section, "cnn_depth", cnn_depth);
    apply_default(section, "hidden", hidden);
    apply_default(section, "tol_ms", tol_ms);
    apply_default(section, "max_epochs", tc.max_epochs);
    apply_default(section, "batch_size", tc.batch_size);
    apply_default(section, "seed", tc.seed);
    apply_default(section, "flip_prob", corr.flip_prob);
    apply_default(section, "dropout_prob", corr.dropout_prob);
    apply_default(section, "spur_prob", corr.spur_prob);

    app.add_option("--config", config_path);
    app.add_option("--data", data_dir, "GRU training database")->required(data_dir.empty());
    app.add_option("--eval-data", eval_args, "databases to score (default: --data)");
    app.add_option("--cnn-models", models_dir)->required(models_dir.empty());
    app.add_option("--out", out_csv, "grid CSV path")->required(out_csv.empty());
    app.add_option("--cnn-depth", cnn_depth);
    app.add_option("--hidden", hidden);
    app.add_option("--tol-ms", tol_ms);
    app.add_option("--max-epochs", tc.max_epochs);
    app.add_option("--batch", tc.batch_size);
    app.add_option("--seed", tc.seed);
    app.add_option("--flip-prob", corr.flip_prob);
    app.add_option("--dropout-prob", corr.dropout_prob);
    app.add_option("--spur-prob", corr.spur_prob);
    app.add_option("--label-halfwidth", label_halfwidth);
    CLI11_PARSE(app, argc, argv);

    auto loaded = load_cnn_models(models_dir);
    auto it = loaded.by_depth.find(cnn_depth);
    if (it == loaded.by_depth.end())
        throw qrs::MissingInput("no depth-" + std::to_string(cnn_depth) + " CNN models in " +
                                models_dir);
    auto& models = it->second;

    const auto train_records = qrs::io::load_record_dir(data_dir);
    if (eval_args.empty()) eval_args.push_back(data_dir);
    const auto databases = load_databases(eval_args);

    corr.seed = qrs::nn::derive_seed(tc.seed, 0xC0DE);
    const auto streams = build_gru_corpus(models, train_records, corr, label_halfwidth);

    qrs::eval::EvalOptions options;
    options.path = qrs::post::Path::Gru;
    options.tol = static_cast<int64_t>(std::llround(tol_ms * qrs::kPipelineHz / 1000.0));

    std::vector<qrs::nn::FoldModel> fold_models(models.size());
    for (size_t m = 0; m < models.size(); ++m) fold_models[m].params = models[m].first;

    std::vector<qrs::io::GridRow> rows;
    for (int layers = 1; layers <= 2; ++layers) {
        for (int seq = 1; seq <= 5; ++seq) {
            qrs::gru::GruConfig gc;
            gc.hidden_layers = layers;
            gc.seq_len_s = seq;
            gc.hidden_size = hidden;
            qrs::nn::TrainConfig cell_tc = tc;
            cell_tc.seed = qrs::nn::derive_seed(tc.seed, static_cast<uint64_t>(layers * 10 + seq));
            const auto result = qrs::gru::train_gru(streams, gc, cell_tc);

            const auto report = qrs::eval::cross_validate(fold_models, models.front().second,
                                                          databases, options, &result.params, &gc);
            for (const auto& row : report.rows)
                rows.push_back({layers, seq, row.database, row.mean_f1, row.std_f1});
            std::cout << "grid layers=" << layers << " seq=" << seq << "s done\n";
        }
    }
    const fs::path out_path(out_csv);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    qrs::io::save_grid_csv(rows, out_path);

    json config = {{"cnn_depth", cnn_depth}, {"hidden", hidden},
                   {"tol_ms", tol_ms},       {"max_epochs", tc.max_epochs},
                   {"seed", tc.seed},        {"flip_prob", corr.flip_prob},
                   {"dropout_prob", corr.dropout_prob}, {"spur_prob", corr.spur_prob}};
    fs::path manifest = out_path;
    manifest.replace_extension(".manifest.json");
    write_manifest(manifest, "sweep_gru_grid", tc.seed, config);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    const std::string usage =
        "usage: qrs <command> [options]\n"
        "commands:\n"
        "  convert         WFDB record -> portable container\n"
        "  synth           generate a synthetic ECG corpus\n"
        "  train-cnn       subject-wise five-fold CNN training\n"
        "  train-gru       train the GRU post-processor\n"
        "  predict         run one record through a model\n"
        "  evaluate        cross-database F1 report\n"
        "  sweep-gru-grid  GRU layers x sequence-length grid\n";
    if (argc < 2) {
        std::cerr << usage;
        return kExitConfig;
    }
    const std::string cmd = argv[1];
    try {
        if (cmd == "convert") return cmd_convert(argc - 1, argv + 1);
        if (cmd == "synth") return cmd_synth(argc - 1, argv + 1);
        if (cmd == "train-cnn") return cmd_train_cnn(argc - 1, argv + 1);
        if (cmd == "train-gru") return cmd_train_gru(argc - 1, argv + 1);
        if (cmd == "predict") return cmd_predict(argc - 1, argv + 1);
        if (cmd == "evaluate") return cmd_evaluate(argc - 1, argv + 1);
        if (cmd == "sweep-gru-grid") return cmd_sweep_gru_grid(argc - 1, argv + 1);
        if (cmd == "--help" || cmd == "-h") {
            std::cout << usage;
            return kExitOk;
        }
        std::cerr << "unknown command '" << cmd << "'\n" << usage;
        return kExitConfig;
    } catch (const qrs::MissingInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingInput;
    } catch (const qrs::UnsupportedFormat& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUnsupported;
    } catch (const qrs::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUnsupported;
    } catch (const qrs::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const qrs::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const qrs::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
