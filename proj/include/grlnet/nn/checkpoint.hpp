// ============================================================================
// grlnet/nn/checkpoint.hpp - versioned text serialization of named tensors
//
//   grlnet-checkpoint 1
//   meta <key> <value...>
//   tensor <name> <rank> <d0> ... <d{rank-1}>
//   <hexfloat> <hexfloat> ...
//   end
//
// Values are written as C99 hexadecimal floats, so doubles round-trip exactly.
// ============================================================================
#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "grlnet/errors.hpp"
#include "grlnet/nn/tensor.hpp"

namespace grlnet::nn {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(std::string_view name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }

    const std::string& require_meta(const std::string& key) const {
        auto it = meta.find(key);
        if (it == meta.end()) throw ValidationError("checkpoint: missing meta key '" + key + "'");
        return it->second;
    }
};

inline void append_tensors(Checkpoint& ckpt, std::span<const NamedTensor> tensors) {
    for (const auto& t : tensors) ckpt.tensors.emplace_back(t.name, Tensor(t.tensor->shape, t.tensor->value));
}

/// Copies values from the checkpoint into `tensors`; names and shapes must match.
inline void restore_tensors(const Checkpoint& ckpt, std::span<const NamedTensor> tensors) {
    for (const auto& t : tensors) {
        const Tensor* src = ckpt.find(t.name);
        if (!src) throw ValidationError("checkpoint: missing tensor '" + t.name + "'");
        require_shape(*src, t.tensor->shape, "checkpoint tensor '" + t.name + "'");
        t.tensor->value = src->value;
    }
}

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::string out = "grlnet-checkpoint " + std::to_string(kCheckpointVersion) + "\n";
    for (const auto& [k, v] : ckpt.meta) {
        if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw ValidationError("checkpoint: meta key/value contains a separator: '" + k + "'");
        out += "meta " + k + " " + v + "\n";
    }
    char buf[64];
    for (const auto& [name, t] : ckpt.tensors) {
        out += "tensor " + name + " " + std::to_string(t.rank());
        for (auto d : t.shape) out += " " + std::to_string(d);
        out += "\n";
        for (std::size_t i = 0; i < t.numel(); ++i) {
            std::snprintf(buf, sizeof buf, "%a", t.value[i]);
            if (i) out += ' ';
            out += buf;
        }
        out += "\n";
    }
    out += "end\n";
    return out;
}

inline Checkpoint parse_checkpoint(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("grlnet-checkpoint ", 0) != 0)
        throw ValidationError("checkpoint: missing header");
    if (std::stoi(line.substr(18)) != kCheckpointVersion)
        throw ValidationError("checkpoint: unsupported version '" + line.substr(18) + "'");
    Checkpoint ckpt;
    bool ended = false;
    while (std::getline(in, line)) {
        if (line == "end") {
            ended = true;
            break;
        }
        if (line.rfind("meta ", 0) == 0) {
            const auto rest = line.substr(5);
            const auto sp = rest.find(' ');
            if (sp == std::string::npos) throw ValidationError("checkpoint: malformed meta line");
            ckpt.meta[rest.substr(0, sp)] = rest.substr(sp + 1);
        } else if (line.rfind("tensor ", 0) == 0) {
            std::istringstream hdr(line.substr(7));
            std::string name;
            std::size_t rank = 0;
            hdr >> name >> rank;
            Shape shape(rank);
            for (auto& d : shape) hdr >> d;
            if (!hdr || name.empty() || rank == 0) throw ValidationError("checkpoint: malformed tensor header");
            std::string data;
            if (!std::getline(in, data)) throw ValidationError("checkpoint: truncated tensor '" + name + "'");
            std::vector<double> values;
            values.reserve(shape_numel(shape));
            const char* p = data.c_str();
            while (*p) {
                while (*p == ' ') ++p;
                if (!*p) break;
                char* end = nullptr;
                values.push_back(std::strtod(p, &end));
                if (end == p) throw ValidationError("checkpoint: malformed value in tensor '" + name + "'");
                p = end;
            }
            ckpt.tensors.emplace_back(name, Tensor(std::move(shape), std::move(values)));
        } else if (!line.empty()) {
            throw ValidationError("checkpoint: unexpected line '" + line.substr(0, 40) + "'");
        }
    }
    if (!ended) throw ValidationError("checkpoint: missing end marker");
    return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    out << serialize_checkpoint(ckpt);
    if (!out) throw IoError("error writing checkpoint '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

}  // namespace grlnet::nn
