#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "aircade/tensor.hpp"

// Little-endian binary file helpers shared by the dataset and checkpoint
// containers. Truncation is reported with expected vs actual byte counts.

namespace aircade::io {

struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw DataFormatError(DataFormatError::Kind::io, "cannot open for write: " + path);
    }
    void bytes(const void* p, size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void i64(int64_t v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void f64_block(const std::vector<double>& v) { bytes(v.data(), v.size() * 8); }
};

struct Reader {
    std::ifstream in;
    std::string path;
    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw DataFormatError(DataFormatError::Kind::io, "cannot open: " + p);
    }
    void bytes(void* p, size_t n, const char* what) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n) {
            throw DataFormatError(DataFormatError::Kind::truncated,
                                  path + ": truncated while reading " + what + " (wanted " +
                                      std::to_string(n) + " bytes, got " +
                                      std::to_string(in.gcount()) + ")");
        }
    }
    uint32_t u32(const char* what) {
        uint32_t v;
        bytes(&v, 4, what);
        return v;
    }
    uint64_t u64(const char* what) {
        uint64_t v;
        bytes(&v, 8, what);
        return v;
    }
    int64_t i64(const char* what) {
        int64_t v;
        bytes(&v, 8, what);
        return v;
    }
    std::string str(const char* what) {
        uint32_t len = u32(what);
        std::string s(len, '\0');
        if (len) bytes(s.data(), len, what);
        return s;
    }
};

}  // namespace aircade::io
