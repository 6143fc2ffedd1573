#pragma once

// JSON scenario files.
//
//   {
//     "name": "DS-01",
//     "grid": {"height": 6, "width": 10},
//     "support": [5, 4],
//     "targets": [{"cell": [2, 0], "load_kN": 150}, {"cell": [3, 9], "load_kN": 0}],
//     "inventory": {"light": 20, "medium": 10},
//     "module_size_m": 1.0
//   }
//
// Row 0 is the top of the grid; loads act downward. Optional keys:
// "include_inventory_rows" (bool), "inventory_rows" (int) and "frames"
// (array of {code, name, outer_radius_m, thickness_ratio, self_load_kN}).

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "trussrl/grid.hpp"

namespace trussrl {

using json = nlohmann::json;

inline Cell cell_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorCategory::input, "cell must be [row, col]");
    return {j[0].get<int>(), j[1].get<int>()};
}

inline json cell_to_json(Cell c) { return json::array({c.row, c.col}); }

inline Scenario scenario_from_json(const json& j, bool require_external_load = true) {
    Scenario s;
    try {
        s.name = j.value("name", std::string{});
        s.height = j.at("grid").at("height").get<int>();
        s.width = j.at("grid").at("width").get<int>();
        s.support = cell_from_json(j.at("support"));
        if (j.contains("frames")) {
            s.frames.clear();
            for (const auto& f : j.at("frames"))
                s.frames.push_back({f.at("code").get<int>(), f.at("name").get<std::string>(),
                                    f.at("outer_radius_m").get<double>(), f.at("thickness_ratio").get<double>(),
                                    f.at("self_load_kN").get<double>()});
            std::sort(s.frames.begin(), s.frames.end(),
                      [](const FrameType& a, const FrameType& b) { return a.code < b.code; });
        }
        for (const auto& t : j.at("targets")) s.targets.push_back({cell_from_json(t.at("cell")), t.value("load_kN", 0.0)});
        const auto& inv = j.at("inventory");
        s.inventory.assign(s.frames.size(), 0);
        for (auto it = inv.begin(); it != inv.end(); ++it) {
            bool found = false;
            for (std::size_t t = 0; t < s.frames.size(); ++t)
                if (s.frames[t].name == it.key()) {
                    s.inventory[t] = it.value().get<int>();
                    found = true;
                }
            if (!found) throw Error(ErrorCategory::input, "inventory names unknown frame type '" + it.key() + "'");
        }
        s.module_size = j.value("module_size_m", 1.0);
        s.include_inventory_rows = j.value("include_inventory_rows", true);
        if (j.contains("inventory_rows")) s.inventory_rows = j.at("inventory_rows").get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorCategory::input, std::string("scenario json: ") + e.what());
    }
    s.validate(require_external_load);
    return s;
}

inline json scenario_to_json(const Scenario& s) {
    json j;
    if (!s.name.empty()) j["name"] = s.name;
    j["grid"] = {{"height", s.height}, {"width", s.width}};
    j["support"] = cell_to_json(s.support);
    j["targets"] = json::array();
    for (const auto& t : s.targets) j["targets"].push_back({{"cell", cell_to_json(t.cell)}, {"load_kN", t.load_kN}});
    j["inventory"] = json::object();
    for (std::size_t t = 0; t < s.frames.size(); ++t) j["inventory"][s.frames[t].name] = s.inventory[t];
    j["module_size_m"] = s.module_size;
    j["include_inventory_rows"] = s.include_inventory_rows;
    if (s.inventory_rows) j["inventory_rows"] = *s.inventory_rows;
    if (s.frames.size() != 2 || s.frames[0].code != 2 || s.frames[1].code != 3) {
        j["frames"] = json::array();
        for (const auto& f : s.frames)
            j["frames"].push_back({{"code", f.code}, {"name", f.name}, {"outer_radius_m", f.outer_radius},
                                   {"thickness_ratio", f.thickness_ratio}, {"self_load_kN", f.self_load_per_node}});
    }
    return j;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::io, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCategory::input, path + ": " + e.what());
    }
}

inline Scenario load_scenario(const std::string& path, bool require_external_load = true) {
    return scenario_from_json(read_json_file(path), require_external_load);
}

inline void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCategory::io, "cannot write " + path);
    out << scenario_to_json(s).dump(2) << '\n';
}

}  // namespace trussrl
