#include "qrs/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "qrs/errors.hpp"

namespace qrs::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return j;
}

void dump_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

json tensor_manifest(const nn::FlatParams& theta) {
    json tensors = json::array();
    for (const auto& e : theta.entries)
        tensors.push_back({{"name", e.name}, {"offset", e.offset}, {"size", e.size},
                           {"shape", e.shape}});
    return tensors;
}

void restore_tensors(nn::FlatParams& theta, const json& tensors, const std::vector<float>& blob) {
    for (const auto& t : tensors) {
        std::vector<int64_t> shape = t.at("shape").get<std::vector<int64_t>>();
        const size_t offset = theta.add(t.at("name").get<std::string>(), shape);
        const size_t size = theta.entries.back().size;
        if (offset + size > blob.size()) throw ParseError("parameter blob shorter than manifest");
        for (size_t i = 0; i < size; ++i) theta.data[offset + i] = blob[offset + i];
    }
}

} // namespace

std::vector<float> read_f32(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 4 != 0) throw ParseError(path.string() + ": size not a multiple of 4");
    std::vector<float> out(bytes.size() / 4);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

void write_f32(const std::vector<float>& values, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 4));
}

void save_record_container(const EcgRecord& record, const fs::path& dir) {
    fs::create_directories(dir);
    json j;
    j["name"] = record.name;
    j["fs"] = record.fs;
    j["n_samples"] = record.n_samples();
    json anns = json::array();
    for (const auto& a : record.annotations)
        anns.push_back({{"index", a.sample_index}, {"code", std::string(1, a.beat_code)}});
    j["annotations"] = anns;
    j["collisions"] = record.annotation_collisions;
    if (!record.source.record_name.empty()) {
        j["source"] = {{"record", record.source.record_name},
                       {"sampling_hz", record.source.sampling_hz},
                       {"n_signals", record.source.n_signals}};
    }
    dump_json(j, dir / (record.name + ".json"));

    std::vector<float> f32(record.signal.begin(), record.signal.end());
    write_f32(f32, dir / (record.name + ".f32"));
}

EcgRecord load_record_container(const fs::path& json_path) {
    const json j = load_json(json_path);
    EcgRecord rec;
    try {
        rec.name = j.at("name").get<std::string>();
        rec.fs = j.at("fs").get<double>();
        for (const auto& a : j.at("annotations")) {
            const std::string code = a.at("code").get<std::string>();
            if (code.size() != 1) throw ParseError("annotation code must be one character");
            rec.annotations.push_back({a.at("index").get<int64_t>(), code[0]});
        }
        if (j.contains("collisions")) rec.annotation_collisions = j.at("collisions").get<int64_t>();
    } catch (const json::exception& e) {
        throw ParseError(json_path.string() + ": " + e.what());
    }

    fs::path f32_path = json_path;
    f32_path.replace_extension(".f32");
    const auto f32 = read_f32(f32_path);
    rec.signal.assign(f32.begin(), f32.end());

    const int64_t declared = j.at("n_samples").get<int64_t>();
    if (declared != rec.n_samples())
        throw ParseError(json_path.string() + ": n_samples does not match signal file");
    for (const auto& a : rec.annotations)
        if (a.sample_index < 0 || a.sample_index >= rec.n_samples())
            throw ParseError(json_path.string() + ": annotation index out of range");
    return rec;
}

std::vector<EcgRecord> load_record_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw MissingInput("record directory not found: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        fs::path f32 = entry.path();
        f32.replace_extension(".f32");
        if (fs::exists(f32)) files.push_back(entry.path()); // containers pair .json with .f32
    }
    std::sort(files.begin(), files.end());
    std::vector<EcgRecord> records;
    records.reserve(files.size());
    for (const auto& f : files) records.push_back(load_record_container(f));
    return records;
}

void save_convnet(const nn::ModelParams& params, const nn::ConvNetConfig& cfg, uint64_t seed,
                  const fs::path& stem) {
    json config = {{"depth", cfg.depth},
                   {"channels", cfg.channels},
                   {"kernel", cfg.kernel},
                   {"threshold", cfg.threshold}};
    json j;
    j["kind"] = "convnet";
    j["config"] = config;
    j["seed"] = seed;
    j["config_hash"] = config_hash(config.dump());
    j["optimizer_state"] = false;
    j["tensors"] = tensor_manifest(params.theta);
    j["bn_offset"] = params.theta.data.size();

    std::vector<float> blob(params.theta.data.begin(), params.theta.data.end());
    for (const auto& s : params.bn) {
        blob.insert(blob.end(), s.mean.begin(), s.mean.end());
        blob.insert(blob.end(), s.var.begin(), s.var.end());
    }
    fs::path json_path = stem;
    json_path += ".json";
    fs::path blob_path = stem;
    blob_path += ".f32";
    dump_json(j, json_path);
    write_f32(blob, blob_path);
}

std::pair<nn::ModelParams, nn::ConvNetConfig> load_convnet(const fs::path& json_path) {
    const json j = load_json(json_path);
    if (j.value("kind", "") != "convnet") throw ParseError(json_path.string() + ": not a convnet model");
    nn::ConvNetConfig cfg;
    cfg.depth = j.at("config").at("depth").get<int>();
    cfg.channels = j.at("config").at("channels").get<int>();
    cfg.kernel = j.at("config").at("kernel").get<int>();
    cfg.threshold = j.at("config").at("threshold").get<double>();
    cfg.validate();

    fs::path blob_path = json_path;
    blob_path.replace_extension(".f32");
    const auto blob = read_f32(blob_path);

    nn::ModelParams params;
    restore_tensors(params.theta, j.at("tensors"), blob);
    size_t at = j.at("bn_offset").get<size_t>();
    for (int l = 0; l < cfg.depth; ++l) {
        nn::BnStats stats;
        const size_t C = static_cast<size_t>(cfg.channels);
        if (at + 2 * C > blob.size()) throw ParseError("parameter blob missing BN statistics");
        stats.mean.assign(blob.begin() + static_cast<ptrdiff_t>(at),
                          blob.begin() + static_cast<ptrdiff_t>(at + C));
        stats.var.assign(blob.begin() + static_cast<ptrdiff_t>(at + C),
                         blob.begin() + static_cast<ptrdiff_t>(at + 2 * C));
        at += 2 * C;
        params.bn.push_back(std::move(stats));
    }
    return {std::move(params), cfg};
}

void save_gru(const gru::GruParams& params, const gru::GruConfig& cfg, uint64_t seed,
              const fs::path& stem) {
    json config = {{"hidden_layers", cfg.hidden_layers},
                   {"seq_len_s", cfg.seq_len_s},
                   {"hidden_size", cfg.hidden_size},
                   {"threshold", cfg.threshold}};
    json j;
    j["kind"] = "gru";
    j["config"] = config;
    j["seed"] = seed;
    j["config_hash"] = config_hash(config.dump());
    j["optimizer_state"] = false;
    j["tensors"] = tensor_manifest(params.theta);

    std::vector<float> blob(params.theta.data.begin(), params.theta.data.end());
    fs::path json_path = stem;
    json_path += ".json";
    fs::path blob_path = stem;
    blob_path += ".f32";
    dump_json(j, json_path);
    write_f32(blob, blob_path);
}

std::pair<gru::GruParams, gru::GruConfig> load_gru(const fs::path& json_path) {
    const json j = load_json(json_path);
    if (j.value("kind", "") != "gru") throw ParseError(json_path.string() + ": not a gru model");
    gru::GruConfig cfg;
    cfg.hidden_layers = j.at("config").at("hidden_layers").get<int>();
    cfg.seq_len_s = j.at("config").at("seq_len_s").get<int>();
    cfg.hidden_size = j.at("config").at("hidden_size").get<int>();
    cfg.threshold = j.at("config").at("threshold").get<double>();
    cfg.validate();

    fs::path blob_path = json_path;
    blob_path.replace_extension(".f32");
    const auto blob = read_f32(blob_path);
    gru::GruParams params;
    restore_tensors(params.theta, j.at("tensors"), blob);
    return {std::move(params), cfg};
}

void save_history_csv(const nn::TrainHistory& history, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "epoch,train_loss,val_loss,lr\n";
    for (const auto& e : history.epochs)
        out << e.epoch << "," << fmt(e.train_loss) << "," << fmt(e.val_loss) << "," << fmt(e.lr)
            << "\n";
}

void save_report_json(const eval::EvalReport& report, const fs::path& path) {
    json rows = json::array();
    for (const auto& row : report.rows) {
        json per_model = json::array();
        for (const auto& m : row.per_model)
            per_model.push_back({{"fold", m.fold},
                                 {"tp", m.tp},
                                 {"fp", m.fp},
                                 {"fn", m.fn},
                                 {"ppv", m.ppv},
                                 {"sensitivity", m.sensitivity},
                                 {"f1", m.f1}});
        rows.push_back({{"database", row.database},
                        {"depth", row.depth},
                        {"path", row.path},
                        {"mean_f1", row.mean_f1},
                        {"std_f1", row.std_f1},
                        {"tp", row.tp},
                        {"fp", row.fp},
                        {"fn", row.fn},
                        {"per_model", per_model}});
    }
    json j;
    j["tolerance_samples"] = report.tol;
    j["macro"] = report.macro;
    j["rows"] = rows;
    dump_json(j, path);
}

void save_report_csv(const eval::EvalReport& report, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "database,depth,path,mean_f1,std_f1,tp,fp,fn\n";
    for (const auto& row : report.rows)
        out << row.database << "," << row.depth << "," << row.path << "," << fmt(row.mean_f1)
            << "," << fmt(row.std_f1) << "," << row.tp << "," << row.fp << "," << row.fn << "\n";
}

void save_grid_csv(const std::vector<GridRow>& rows, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "layers,seq_len_s,database,mean_f1,std_f1\n";
    for (const auto& r : rows)
        out << r.layers << "," << r.seq_len_s << "," << r.database << "," << fmt(r.mean_f1) << ","
            << fmt(r.std_f1) << "\n";
}

void save_nodes_csv(const std::vector<post::QrsNode>& nodes, const std::vector<double>& derivative,
                    const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "start_loc,confidence,q_loc,support_score\n";
    for (const auto& n : nodes)
        out << n.start_loc << "," << n.confidence << "," << n.q_loc << ","
            << post::support_score(n, derivative) << "\n";
}

void save_peaks_text(const std::vector<int64_t>& peaks, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    for (int64_t p : peaks) out << p << "\n";
}

std::string config_hash(const std::string& canonical_json) {
    uint64_t hash = 0xCBF29CE484222325ULL;
    for (unsigned char c : canonical_json) {
        hash ^= c;
        hash *= 0x100000001B3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

} // namespace qrs::io
