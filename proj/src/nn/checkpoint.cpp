#include "tractokit/nn/checkpoint.hpp"

#include <algorithm>
#include <map>

#include "tractokit/util/binio.hpp"
#include "tractokit/util/error.hpp"

namespace tractokit::nn {

namespace {

template <typename T>
constexpr std::uint8_t dtype_tag() {
    return sizeof(T) == 4 ? 0 : 1;
}

template <typename T>
void write_buffer(ByteWriter& w, const Tensor<T>& t) {
    if constexpr (sizeof(T) == 4) {
        for (std::size_t i = 0; i < t.numel(); ++i) w.f32(static_cast<float>(t.data[i]));
    } else {
        for (std::size_t i = 0; i < t.numel(); ++i) w.f64(static_cast<double>(t.data[i]));
    }
}

template <typename T>
void read_buffer(ByteReader& r, Tensor<T>& t) {
    if constexpr (sizeof(T) == 4) {
        for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] = static_cast<T>(r.f32());
    } else {
        for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] = static_cast<T>(r.f64());
    }
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const std::vector<NamedTensor<T>>& state,
                     std::uint64_t step, const std::string& stage) {
    ByteWriter w;
    w.bytes("TKPT", 4);
    w.u32(1);
    w.u8(dtype_tag<T>());
    w.u64(step);
    w.str(stage);
    w.u32(static_cast<std::uint32_t>(state.size()));
    for (const NamedTensor<T>& nt : state) {
        w.str(nt.name);
        w.u32(static_cast<std::uint32_t>(nt.tensor->rank()));
        for (std::size_t d : nt.tensor->shape) w.u64(d);
        write_buffer(w, *nt.tensor);
    }
    write_file(path, w.buffer());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    const std::vector<char> bytes = read_file(path);
    ByteReader r(bytes);
    r.expect_magic("TKPT", 4);
    const std::size_t ver_at = r.offset();
    const std::uint32_t version = r.u32();
    if (version != 1)
        throw FormatError("unsupported TKPT version " + std::to_string(version), ver_at);
    const std::size_t tag_at = r.offset();
    const std::uint8_t tag = r.u8();
    if (tag != dtype_tag<T>())
        throw FormatError("TKPT dtype tag " + std::to_string(tag) + " does not match reader",
                          tag_at);
    Checkpoint<T> ck;
    ck.step = r.u64();
    ck.stage = r.str();
    const std::uint32_t n = r.u32();
    ck.tensors.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        const std::size_t rank_at = r.offset();
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank), rank_at);
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d)
            shape[d] = static_cast<std::size_t>(r.u64());
        const std::size_t data_at = r.offset();
        if (shape_numel(shape) > (1u << 28))
            throw FormatError("implausible tensor size", data_at);
        Tensor<T> t(shape);
        read_buffer(r, t);
        ck.tensors.emplace_back(std::move(name), std::move(t));
    }
    r.expect_end();
    return ck;
}

template <typename T>
std::uint64_t load_state(const std::string& path, const std::vector<NamedTensor<T>>& state) {
    Checkpoint<T> ck = load_checkpoint<T>(path);
    std::map<std::string, Tensor<T>*> want;
    for (const NamedTensor<T>& nt : state) want[nt.name] = nt.tensor;
    if (ck.tensors.size() != want.size())
        throw FormatError("checkpoint holds " + std::to_string(ck.tensors.size()) +
                              " tensors, model expects " + std::to_string(want.size()),
                          0);
    for (auto& [name, tensor] : ck.tensors) {
        auto it = want.find(name);
        if (it == want.end())
            throw FormatError("checkpoint tensor \"" + name + "\" unknown to model", 0);
        if (it->second->shape != tensor.shape)
            throw FormatError("checkpoint tensor \"" + name + "\" shape " +
                                  shape_str(tensor.shape) + " does not match model " +
                                  shape_str(it->second->shape),
                              0);
        it->second->data = std::move(tensor.data);  // keep the requires_grad flag
        want.erase(it);
    }
    return ck.step;
}

template void save_checkpoint<float>(const std::string&, const std::vector<NamedTensor<float>>&,
                                     std::uint64_t, const std::string&);
template void save_checkpoint<double>(const std::string&,
                                      const std::vector<NamedTensor<double>>&, std::uint64_t,
                                      const std::string&);
template Checkpoint<float> load_checkpoint<float>(const std::string&);
template Checkpoint<double> load_checkpoint<double>(const std::string&);
template std::uint64_t load_state<float>(const std::string&,
                                         const std::vector<NamedTensor<float>>&);
template std::uint64_t load_state<double>(const std::string&,
                                          const std::vector<NamedTensor<double>>&);

}  // namespace tractokit::nn
