#include "contilora/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace contilora {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json spec_to_json(const NetworkSpec& spec) {
    json j;
    j["layer_dims"] = spec.layer_dims;
    j["activation"] = spec.activation == Activation::tanh_fn ? "tanh" : "relu";
    return j;
}

NetworkSpec spec_from_json(const json& j) {
    NetworkSpec spec;
    spec.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    spec.activation = j.at("activation") == "tanh" ? Activation::tanh_fn : Activation::relu_fn;
    spec.validate();
    return spec;
}

json adapter_entry(const LoraAdapter& ad) {
    json j;
    j["task_id"] = ad.task_id;
    j["d_out"] = ad.b.rows();
    j["d_in"] = ad.a.cols();
    j["rank"] = ad.rank;
    j["trainable"] = ad.trainable;
    return j;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw NumericError("cannot write " + path);
    os << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("missing file " + path);
    return json::parse(is);
}

}  // namespace

void save_task_checkpoint(const std::string& dir, const NetworkSpec& spec,
                          const TaskCheckpoint& cp) {
    fs::create_directories(dir);
    json manifest;
    manifest["schema_version"] = 1;
    manifest["network"] = spec_to_json(spec);
    manifest["task_id"] = cp.task_id;
    manifest["task_name"] = cp.task_name;
    manifest["final_loss"] = cp.final_loss;
    manifest["mean_final_alignment"] = cp.mean_final_alignment;
    for (std::size_t l = 0; l < cp.adapters.size(); ++l) {
        manifest["adapters"].push_back(adapter_entry(cp.adapters[l]));
        // Compressed history serializes like an adapter with task_id -1.
        json jc;
        jc["task_id"] = -1;
        jc["retained_energy"] = cp.compressed[l].retained_energy;
        jc["source_task_count"] = cp.compressed[l].source_task_count;
        manifest["compressed"].push_back(jc);
        const std::string tag = std::to_string(l);
        save_matrix(dir + "/adapter_l" + tag + "_B.bin", cp.adapters[l].b);
        save_matrix(dir + "/adapter_l" + tag + "_A.bin", cp.adapters[l].a);
        save_matrix(dir + "/compressed_l" + tag + "_B.bin", cp.compressed[l].b_his);
        save_matrix(dir + "/compressed_l" + tag + "_A.bin", cp.compressed[l].a_his);
    }
    write_json(dir + "/manifest.json", manifest);
}

TaskCheckpoint load_task_checkpoint(const std::string& dir) {
    const json manifest = read_json(dir + "/manifest.json");
    TaskCheckpoint cp;
    cp.task_id = manifest.at("task_id").get<int>();
    cp.task_name = manifest.at("task_name").get<std::string>();
    cp.final_loss = manifest.at("final_loss").get<double>();
    cp.mean_final_alignment = manifest.at("mean_final_alignment").get<double>();
    const std::size_t layers = manifest.at("adapters").size();
    for (std::size_t l = 0; l < layers; ++l) {
        const std::string tag = std::to_string(l);
        LoraAdapter ad;
        ad.b = load_matrix(dir + "/adapter_l" + tag + "_B.bin");
        ad.a = load_matrix(dir + "/adapter_l" + tag + "_A.bin");
        ad.rank = manifest.at("adapters")[l].at("rank").get<std::size_t>();
        ad.task_id = manifest.at("adapters")[l].at("task_id").get<int>();
        ad.trainable = manifest.at("adapters")[l].at("trainable").get<bool>();
        cp.adapters.push_back(std::move(ad));
        CompressedHistory ch;
        ch.b_his = load_matrix(dir + "/compressed_l" + tag + "_B.bin");
        ch.a_his = load_matrix(dir + "/compressed_l" + tag + "_A.bin");
        ch.retained_energy = manifest.at("compressed")[l].at("retained_energy").get<double>();
        ch.source_task_count = manifest.at("compressed")[l].at("source_task_count").get<int>();
        cp.compressed.push_back(std::move(ch));
    }
    return cp;
}

void save_network(const std::string& dir, const NetworkSpec& spec, const Params& params) {
    fs::create_directories(dir);
    json manifest;
    manifest["schema_version"] = 1;
    manifest["network"] = spec_to_json(spec);
    for (std::size_t l = 0; l < params.size(); ++l) {
        const std::string tag = std::to_string(l);
        save_matrix(dir + "/base_w" + tag + ".bin", params[l].base_weight);
        save_matrix(dir + "/base_b" + tag + ".bin", params[l].base_bias);
        json inventory = json::array();
        for (std::size_t k = 0; k < params[l].adapters.frozen.size(); ++k) {
            const LoraAdapter& ad = params[l].adapters.frozen[k];
            inventory.push_back(adapter_entry(ad));
            save_matrix(dir + "/frozen_l" + tag + "_t" + std::to_string(k) + "_B.bin", ad.b);
            save_matrix(dir + "/frozen_l" + tag + "_t" + std::to_string(k) + "_A.bin", ad.a);
        }
        manifest["layers"].push_back({{"frozen", inventory}});
        if (params[l].adapters.compressed.has_value()) {
            const CompressedHistory& ch = *params[l].adapters.compressed;
            save_matrix(dir + "/compressed_l" + tag + "_B.bin", ch.b_his);
            save_matrix(dir + "/compressed_l" + tag + "_A.bin", ch.a_his);
            manifest["layers"].back()["retained_energy"] = ch.retained_energy;
            manifest["layers"].back()["source_task_count"] = ch.source_task_count;
        }
    }
    write_json(dir + "/network.json", manifest);
}

std::pair<NetworkSpec, Params> load_network(const std::string& dir) {
    const json manifest = read_json(dir + "/network.json");
    NetworkSpec spec = spec_from_json(manifest.at("network"));
    Params params;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::string tag = std::to_string(l);
        LayerParams lp;
        lp.base_weight = load_matrix(dir + "/base_w" + tag + ".bin");
        lp.base_bias = load_matrix(dir + "/base_b" + tag + ".bin");
        const json& layer = manifest.at("layers")[l];
        for (std::size_t k = 0; k < layer.at("frozen").size(); ++k) {
            LoraAdapter ad;
            ad.b = load_matrix(dir + "/frozen_l" + tag + "_t" + std::to_string(k) + "_B.bin");
            ad.a = load_matrix(dir + "/frozen_l" + tag + "_t" + std::to_string(k) + "_A.bin");
            ad.rank = layer.at("frozen")[k].at("rank").get<std::size_t>();
            ad.task_id = layer.at("frozen")[k].at("task_id").get<int>();
            ad.trainable = false;
            lp.adapters.frozen.push_back(std::move(ad));
        }
        if (layer.contains("retained_energy")) {
            CompressedHistory ch;
            ch.b_his = load_matrix(dir + "/compressed_l" + tag + "_B.bin");
            ch.a_his = load_matrix(dir + "/compressed_l" + tag + "_A.bin");
            ch.retained_energy = layer.at("retained_energy").get<double>();
            ch.source_task_count = layer.at("source_task_count").get<int>();
            lp.adapters.compressed = std::move(ch);
        }
        params.push_back(std::move(lp));
    }
    return {std::move(spec), std::move(params)};
}

}  // namespace contilora
