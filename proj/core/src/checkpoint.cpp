#include "protonesy/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace protonesy {

namespace {

constexpr const char* kVersion = "protonesy-checkpoint-v1";
constexpr char kHexDigits[] = "0123456789abcdef";

std::string encode_doubles(const std::vector<double>& values) {
    std::string out;
    out.reserve(values.size() * 16);
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int shift = 60; shift >= 0; shift -= 4) out.push_back(kHexDigits[(bits >> shift) & 0xF]);
    }
    return out;
}

std::vector<double> decode_doubles(const std::string& hex) {
    if (hex.size() % 16 != 0) throw std::runtime_error("checkpoint: malformed double blob");
    std::vector<double> out(hex.size() / 16);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int j = 0; j < 16; ++j) {
            const char c = hex[i * 16 + static_cast<std::size_t>(j)];
            std::uint64_t digit;
            if (c >= '0' && c <= '9')
                digit = static_cast<std::uint64_t>(c - '0');
            else if (c >= 'a' && c <= 'f')
                digit = static_cast<std::uint64_t>(c - 'a' + 10);
            else
                throw std::runtime_error("checkpoint: bad hex digit");
            bits = (bits << 4) | digit;
        }
        std::memcpy(&out[i], &bits, sizeof(double));
    }
    return out;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    nlohmann::json doc;
    doc["version"] = kVersion;
    doc["spec"] = {{"input_dim", ckpt.spec.input_dim},
                   {"hidden", ckpt.spec.hidden},
                   {"output_dim", ckpt.spec.output_dim},
                   {"init_seed", ckpt.spec.init_seed}};
    doc["step"] = ckpt.params.step;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : ckpt.params.layers) {
        layers.push_back({{"in", layer.in},
                          {"out", layer.out},
                          {"weights", encode_doubles(layer.weights)},
                          {"bias", encode_doubles(layer.bias)},
                          {"m_weights", encode_doubles(layer.m_weights)},
                          {"v_weights", encode_doubles(layer.v_weights)},
                          {"m_bias", encode_doubles(layer.m_bias)},
                          {"v_bias", encode_doubles(layer.v_bias)}});
    }
    doc["layers"] = std::move(layers);

    doc["has_bank"] = ckpt.has_bank;
    if (ckpt.has_bank) {
        nlohmann::json groups = nlohmann::json::array();
        for (int g = 0; g < ckpt.bank.num_groups(); ++g) {
            nlohmann::json entries = nlohmann::json::array();
            for (int c = 0; c < ckpt.bank.num_classes(g); ++c) {
                const CentroidStatus st = ckpt.bank.status(g, c);
                nlohmann::json entry;
                entry["status"] = st == CentroidStatus::Missing
                                      ? "missing"
                                      : (st == CentroidStatus::Labelled ? "labelled" : "zero_shot");
                if (st != CentroidStatus::Missing)
                    entry["values"] = encode_doubles(ckpt.bank.centroid(g, c));
                entries.push_back(std::move(entry));
            }
            groups.push_back({{"dim", ckpt.bank.dim(g)},
                              {"classes", ckpt.bank.num_classes(g)},
                              {"centroids", std::move(entries)}});
        }
        doc["bank"] = std::move(groups);
    }
    return doc.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& json_text) {
    const nlohmann::json doc = nlohmann::json::parse(json_text);
    if (doc.at("version").get<std::string>() != kVersion)
        throw std::runtime_error("checkpoint: unsupported version");

    Checkpoint ckpt;
    const auto& spec = doc.at("spec");
    ckpt.spec.input_dim = spec.at("input_dim").get<int>();
    ckpt.spec.hidden = spec.at("hidden").get<std::vector<int>>();
    ckpt.spec.output_dim = spec.at("output_dim").get<int>();
    ckpt.spec.init_seed = spec.at("init_seed").get<std::uint64_t>();
    ckpt.params.step = doc.at("step").get<std::int64_t>();
    for (const auto& entry : doc.at("layers")) {
        ParamState::Layer layer;
        layer.in = entry.at("in").get<int>();
        layer.out = entry.at("out").get<int>();
        layer.weights = decode_doubles(entry.at("weights").get<std::string>());
        layer.bias = decode_doubles(entry.at("bias").get<std::string>());
        layer.m_weights = decode_doubles(entry.at("m_weights").get<std::string>());
        layer.v_weights = decode_doubles(entry.at("v_weights").get<std::string>());
        layer.m_bias = decode_doubles(entry.at("m_bias").get<std::string>());
        layer.v_bias = decode_doubles(entry.at("v_bias").get<std::string>());
        ckpt.params.layers.push_back(std::move(layer));
    }

    ckpt.has_bank = doc.value("has_bank", false);
    if (ckpt.has_bank) {
        std::vector<int> classes, dims;
        for (const auto& group : doc.at("bank")) {
            classes.push_back(group.at("classes").get<int>());
            dims.push_back(group.at("dim").get<int>());
        }
        ckpt.bank = CentroidBank(classes, dims);
        int g = 0;
        for (const auto& group : doc.at("bank")) {
            int c = 0;
            for (const auto& entry : group.at("centroids")) {
                const std::string status = entry.at("status").get<std::string>();
                if (status == "labelled")
                    ckpt.bank.set_labelled(g, c, decode_doubles(entry.at("values").get<std::string>()));
                else if (status == "zero_shot")
                    ckpt.bank.set_zero_shot(g, c, decode_doubles(entry.at("values").get<std::string>()));
                ++c;
            }
            ++g;
        }
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << checkpoint_to_json(ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return checkpoint_from_json(buffer.str());
}

}  // namespace protonesy
