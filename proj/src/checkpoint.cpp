#include "prnet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "prnet/binio.hpp"
#include "prnet/error.hpp"

namespace prnet {

using binio::get_f32;
using binio::get_f64;
using binio::get_u64;
using binio::put_f32;
using binio::put_f64;
using binio::put_u64;

namespace {

constexpr char kMagic[4] = {'P', 'R', 'N', '1'};

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries,
                     bool f32) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    for (const auto& [name, tensor] : entries) {
        put_u64(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(out, tensor->rank());
        for (size_t d = 0; d < tensor->rank(); ++d) put_u64(out, tensor->dim(d));
        const char width = f32 ? 4 : 8;
        out.put(width);
        for (size_t i = 0; i < tensor->size(); ++i) {
            if (f32)
                put_f32(out, static_cast<float>((*tensor)[i]));
            else
                put_f64(out, (*tensor)[i]);
        }
    }
    if (!out) throw ValidationError("write failed for checkpoint: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ValidationError("bad checkpoint magic in " + path);
    }
    std::map<std::string, Tensor> out;
    while (true) {
        in.peek();
        if (in.eof()) break;
        uint64_t name_len = get_u64(in);
        if (name_len > (1ull << 20)) throw ValidationError("implausible name length in " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!in) throw ValidationError("checkpoint truncated inside a name");
        uint64_t rank = get_u64(in);
        if (rank > 8) throw ValidationError("implausible tensor rank in " + path);
        std::vector<size_t> shape(rank);
        size_t count = 1;
        for (uint64_t d = 0; d < rank; ++d) {
            shape[d] = get_u64(in);
            count *= shape[d];
        }
        int width = in.get();
        if (width != 4 && width != 8) throw ValidationError("bad width flag in " + path);
        Tensor t(shape);
        for (size_t i = 0; i < count; ++i) {
            t[i] = width == 8 ? get_f64(in) : static_cast<double>(get_f32(in));
        }
        if (!out.emplace(std::move(name), std::move(t)).second) {
            throw ValidationError("duplicate tensor name in " + path);
        }
    }
    return out;
}

void load_into(const std::map<std::string, Tensor>& loaded, const StateDict& targets) {
    for (const auto& [name, tensor] : targets) {
        auto it = loaded.find(name);
        if (it == loaded.end()) throw ValidationError("checkpoint missing tensor: " + name);
        if (!it->second.same_shape(*tensor)) {
            throw ShapeMismatch("checkpoint tensor " + name + " has shape " +
                                it->second.shape_str() + ", model expects " + tensor->shape_str());
        }
        *tensor = it->second;
    }
}

}  // namespace prnet
