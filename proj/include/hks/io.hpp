#pragma once

// File plumbing: gzip-transparent line reading, SHA-256 digests, globbing,
// atomic writes and UTF-8 repair.

#include <glob.h>
#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/utf8.h>

#include "hks/error.hpp"

namespace hks::io {

/// Reads lines from a plain or gzip-compressed file.
class LineReader {
   public:
    explicit LineReader(const std::string &path) : path_(path) {
        file_ = gzopen(path.c_str(), "rb");
        if (!file_) throw IoError("cannot open " + path);
        gzbuffer(file_, 1 << 17);
    }
    LineReader(const LineReader &) = delete;
    LineReader &operator=(const LineReader &) = delete;
    ~LineReader() {
        if (file_) gzclose(file_);
    }

    /// Next line without its terminator; false at end of file.
    bool next(std::string &line) {
        line.clear();
        std::array<char, 1 << 16> buf;
        bool any = false;
        while (gzgets(file_, buf.data(), static_cast<int>(buf.size())) != nullptr) {
            any = true;
            std::string_view chunk(buf.data());
            if (!chunk.empty() && chunk.back() == '\n') {
                chunk.remove_suffix(1);
                line.append(chunk);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return true;
            }
            line.append(chunk);
        }
        int err = 0;
        gzerror(file_, &err);
        if (err != Z_OK && err != Z_STREAM_END) throw IoError("read error in " + path_);
        return any;
    }

   private:
    std::string path_;
    gzFile file_ = nullptr;
};

class Sha256 {
   public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw ResourceError("SHA-256 unavailable");
        }
    }
    void update(std::string_view data) { EVP_DigestUpdate(ctx_.get(), data.data(), data.size()); }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out.push_back(digits[md[i] >> 4]);
            out.push_back(digits[md[i] & 15]);
        }
        return out;
    }

   private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view data) {
    Sha256 h;
    h.update(data);
    return h.hex();
}

inline std::string sha256_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    Sha256 h;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
    }
    return h.hex();
}

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes to a temporary sibling, then renames over `path`.
inline void write_file_atomic(const std::string &path, std::string_view content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp + ": " + ec.message());
}

/// Sorted paths matching a shell glob; a literal existing path matches itself.
inline std::vector<std::string> expand_glob(const std::string &pattern) {
    glob_t g{};
    std::vector<std::string> out;
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    std::sort(out.begin(), out.end());
    return out;
}

/// Replaces invalid UTF-8 sequences with U+FFFD. Returns true if anything changed.
inline bool repair_utf8(std::string &s) {
    const auto *p = reinterpret_cast<const uint8_t *>(s.data());
    const auto len = static_cast<int32_t>(s.size());
    int32_t i = 0;
    bool bad = false;
    while (i < len && !bad) {
        UChar32 c;
        U8_NEXT(p, i, len, c);
        bad = c < 0;
    }
    if (!bad) return false;
    std::string out;
    out.reserve(s.size() + 8);
    i = 0;
    while (i < len) {
        const int32_t start = i;
        UChar32 c;
        U8_NEXT(p, i, len, c);
        if (c < 0) {
            out += "\xEF\xBF\xBD";
        } else {
            out.append(s, static_cast<std::size_t>(start), static_cast<std::size_t>(i - start));
        }
    }
    s = std::move(out);
    return true;
}

}  // namespace hks::io
