#include "stgcd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace stgcd {

namespace {

static_assert(sizeof(double) == 8, "64-bit reals required");

void write_le_doubles(std::ostream& out, const std::vector<double>& v) {
    // Host is little-endian on all supported targets; write raw.
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out << kCheckpointFormatVersion << "\n" << entries.size() << "\n";
    for (const auto& [name, t] : entries) {
        out << name << " " << t.rank();
        for (size_t d : t.shape()) out << " " << d;
        out << "\n";
    }
    for (const auto& [name, t] : entries) write_le_doubles(out, t.data());
    if (!out) throw std::runtime_error("write failure on checkpoint: " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    int version = -1;
    size_t count = 0;
    in >> version >> count;
    if (version != kCheckpointFormatVersion)
        throw std::runtime_error("unsupported checkpoint format version " +
                                 std::to_string(version) + " in " + path);
    struct Entry {
        std::string name;
        std::vector<size_t> shape;
    };
    std::vector<Entry> header(count);
    for (auto& e : header) {
        size_t rank = 0;
        in >> e.name >> rank;
        e.shape.resize(rank);
        for (auto& d : e.shape) in >> d;
    }
    in.ignore(1, '\n');
    if (!in) throw std::runtime_error("malformed checkpoint header: " + path);

    NamedTensors out;
    out.reserve(count);
    for (auto& e : header) {
        size_t n = 1;
        for (size_t d : e.shape) n *= d;
        std::vector<double> data(n);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
        out.emplace_back(e.name, Tensor::from(std::move(data), e.shape));
    }
    return out;
}

void restore_parameters(const NamedTensors& entries, const NamedTensors& params) {
    std::map<std::string, Tensor> by_name;
    for (const auto& [name, t] : entries) by_name.emplace(name, t);
    for (const auto& [name, param] : params) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint missing tensor: " + name);
        if (it->second.shape() != param.shape())
            throw std::runtime_error("checkpoint shape mismatch for " + name + ": " +
                                     it->second.shape_str() + " vs " +
                                     param.shape_str());
        Tensor p = param;
        p.mutable_data() = it->second.data();
    }
}

}  // namespace stgcd
