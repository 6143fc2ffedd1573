#pragma once

// Checkpoint file layout (little-endian host assumed):
//   8 bytes   magic "TRSRLCK1"
//   u64       header length
//   header    JSON with the format version, input shape and configs;
//             also the rng state and the ordered parameter table
//   float32   parameter values, then Adam first and second moments, in table order

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "trussrl/trainer.hpp"

namespace trussrl {

inline constexpr char kCheckpointMagic[8] = {'T', 'R', 'S', 'R', 'L', 'C', 'K', '1'};
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void write_floats(std::ostream& os, const nn::Matrix<float>& m) {
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

inline void read_floats(std::istream& is, nn::Matrix<float>& m) {
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
    if (!is) throw Error(ErrorCategory::io, "truncated checkpoint payload");
}

}  // namespace detail

/// Writes to `path.tmp` and renames over `path`.
inline void save_checkpoint(Trainer& t, const std::string& path) {
    auto params = t.network.parameters();
    t.optimizer.ensure_state(params);

    nlohmann::json h;
    h["format"] = "trussrl-checkpoint";
    h["version"] = kCheckpointVersion;
    const auto& spec = t.network.spec();
    h["input"] = {{"rows", spec.rows}, {"cols", spec.cols}, {"actions", spec.actions}, {"codes", spec.codes}};
    h["train_config"] = to_json(t.config);
    h["rng"] = t.rng.serialize();
    h["adam_steps"] = t.optimizer.steps();
    h["iteration"] = t.iteration;
    h["total_steps"] = t.total_steps;
    h["phase"] = t.phase;
    h["parameters"] = nlohmann::json::array();
    for (auto* p : params) h["parameters"].push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
    const std::string header = h.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error(ErrorCategory::io, "cannot write checkpoint " + tmp);
        os.write(kCheckpointMagic, sizeof kCheckpointMagic);
        const std::uint64_t len = header.size();
        os.write(reinterpret_cast<const char*>(&len), sizeof len);
        os.write(header.data(), static_cast<std::streamsize>(header.size()));
        for (auto* p : params) detail::write_floats(os, p->value);
        for (auto& m : t.optimizer.first_moments()) detail::write_floats(os, m);
        for (auto& v : t.optimizer.second_moments()) detail::write_floats(os, v);
        if (!os) throw Error(ErrorCategory::io, "failed writing checkpoint " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCategory::io, "cannot move checkpoint into place: " + ec.message());
}

inline Trainer load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCategory::io, "cannot open checkpoint " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || !std::equal(magic, magic + 8, kCheckpointMagic))
        throw Error(ErrorCategory::io, path + " is not a checkpoint file");
    std::uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!is || len > (1u << 26)) throw Error(ErrorCategory::io, "corrupt checkpoint header");
    std::string header(len, '\0');
    is.read(header.data(), static_cast<std::streamsize>(len));
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::io, std::string("corrupt checkpoint header: ") + e.what());
    }
    if (h.value("version", 0) != kCheckpointVersion)
        throw Error(ErrorCategory::io, "unsupported checkpoint version");

    InputSpec spec;
    spec.rows = h["input"]["rows"].get<int>();
    spec.cols = h["input"]["cols"].get<int>();
    spec.actions = h["input"]["actions"].get<int>();
    spec.codes = h["input"]["codes"].get<std::vector<int>>();
    const TrainConfig cfg = train_config_from_json(h["train_config"]);

    Trainer t(spec, cfg, 0);
    t.rng.deserialize(h["rng"].get<std::string>());
    t.iteration = h["iteration"].get<int>();
    t.total_steps = h["total_steps"].get<long long>();
    t.phase = h["phase"].get<int>();

    auto params = t.network.parameters();
    const auto& table = h["parameters"];
    if (table.size() != params.size()) throw Error(ErrorCategory::shape, "checkpoint parameter count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k)
        if (table[k]["name"] != params[k]->name || table[k]["rows"] != params[k]->value.rows() ||
            table[k]["cols"] != params[k]->value.cols())
            throw Error(ErrorCategory::shape, "checkpoint parameter " + params[k]->name + " has a different shape");
    for (auto* p : params) detail::read_floats(is, p->value);
    t.optimizer.ensure_state(params);
    for (auto& m : t.optimizer.first_moments()) detail::read_floats(is, m);
    for (auto& v : t.optimizer.second_moments()) detail::read_floats(is, v);
    t.optimizer.set_steps(h["adam_steps"].get<long long>());
    return t;
}

}  // namespace trussrl
