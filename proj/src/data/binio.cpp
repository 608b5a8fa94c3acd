#include "tractokit/util/binio.hpp"

#include <cstdio>

namespace tractokit {

std::vector<char> read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path + " for reading");
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    if (size < 0) {
        std::fclose(f);
        throw IoError("cannot stat " + path);
    }
    std::fseek(f, 0, SEEK_SET);
    std::vector<char> buf(static_cast<std::size_t>(size));
    const std::size_t got = size ? std::fread(buf.data(), 1, buf.size(), f) : 0;
    std::fclose(f);
    if (got != buf.size()) throw IoError("short read from " + path);
    return buf;
}

static void write_raw(const std::string& path, const char* data, std::size_t n) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open " + path + " for writing");
    const std::size_t put = n ? std::fwrite(data, 1, n, f) : 0;
    const int rc = std::fclose(f);
    if (put != n || rc != 0) throw IoError("short write to " + path);
}

void write_file(const std::string& path, const std::vector<char>& bytes) {
    write_raw(path, bytes.data(), bytes.size());
}

void write_file(const std::string& path, const std::string& text) {
    write_raw(path, text.data(), text.size());
}

void quantize_f32(double* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<double>(static_cast<float>(d[i]));
}

}  // namespace tractokit
