#pragma once

#include <cstdio>
#include <string>

#include <json.hpp>

namespace pmgeo {

// Deterministic JSON serialization: keys are sorted (nlohmann objects are
// ordered maps) and floating-point numbers are printed with 17 significant
// digits so values round-trip exactly and output is byte-identical across
// runs.
inline void dump_json_to(const nlohmann::json& j, std::string& out, int indent, int depth) {
    using nlohmann::json;
    auto pad = [&](int d) { out.append(size_t(indent) * d, ' '); };
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            size_t k = 0;
            for (auto it = j.begin(); it != j.end(); ++it, ++k) {
                pad(depth + 1);
                out += json(it.key()).dump();
                out += ": ";
                dump_json_to(it.value(), out, indent, depth + 1);
                if (k + 1 < j.size()) out += ",";
                out += "\n";
            }
            pad(depth);
            out += "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (size_t k = 0; k < j.size(); ++k) {
                pad(depth + 1);
                dump_json_to(j[k], out, indent, depth + 1);
                if (k + 1 < j.size()) out += ",";
                out += "\n";
            }
            pad(depth);
            out += "]";
            return;
        }
        case json::value_t::number_float: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", j.get<double>());
            out += buf;
            return;
        }
        default:
            out += j.dump();
            return;
    }
}

inline std::string dump_json(const nlohmann::json& j, int indent = 2) {
    std::string out;
    dump_json_to(j, out, indent, 0);
    out += "\n";
    return out;
}

}  // namespace pmgeo
