#pragma once

// Test-only oracles and generators. Nothing here calls into the matcher or
// the ICU-backed helpers it is used to check.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hks::testing {

inline std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    for (std::size_t i = 0; i < s.size();) {
        const auto b = static_cast<unsigned char>(s[i]);
        char32_t cp;
        std::size_t len;
        if (b < 0x80) {
            cp = b;
            len = 1;
        } else if ((b >> 5) == 0x6) {
            cp = b & 0x1F;
            len = 2;
        } else if ((b >> 4) == 0xE) {
            cp = b & 0x0F;
            len = 3;
        } else {
            cp = b & 0x07;
            len = 4;
        }
        for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline std::string encode_utf8(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

/// CJK for the restricted test alphabets: CJK unified ideographs and kana.
inline bool oracle_is_cjk(char32_t c) {
    return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3040 && c <= 0x30FF);
}

/// Word characters for the restricted test alphabets: ASCII alnum, '_', and
/// Latin-1 / Latin Extended-A letters.
inline bool oracle_is_word(char32_t c) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_') return true;
    if (c >= 0xC0 && c <= 0x17F && c != 0xD7 && c != 0xF7) return true;
    return false;
}

/// Naive per-pattern scan with the word-boundary rule: every occurrence of
/// every pattern, counted per pattern index.
inline std::vector<std::size_t> naive_counts(const std::vector<std::string> &patterns, std::string_view text,
                                             bool boundaries = true) {
    const std::u32string t = decode_utf8(text);
    std::vector<std::size_t> counts(patterns.size(), 0);
    for (std::size_t p = 0; p < patterns.size(); ++p) {
        const std::u32string pat = decode_utf8(patterns[p]);
        if (pat.empty() || pat.size() > t.size()) continue;
        bool has_cjk = false;
        for (char32_t c : pat) has_cjk = has_cjk || oracle_is_cjk(c);
        const bool check_start = boundaries && !has_cjk && oracle_is_word(pat.front());
        const bool check_end = boundaries && !has_cjk && oracle_is_word(pat.back());
        for (std::size_t pos = t.find(pat); pos != std::u32string::npos; pos = t.find(pat, pos + 1)) {
            if (check_start && pos > 0 && oracle_is_word(t[pos - 1])) continue;
            const std::size_t end = pos + pat.size();
            if (check_end && end < t.size() && oracle_is_word(t[end])) continue;
            ++counts[p];
        }
    }
    return counts;
}

/// Reference segmenter for text over ASCII letters/digits, ASCII spaces and
/// punctuation, and CJK: maximal alphanumeric runs count once, each CJK
/// character counts once. A comma or period between two digits stays inside
/// the number ("1,000").
inline std::size_t reference_token_count(std::string_view text) {
    const std::u32string t = decode_utf8(text);
    auto digit = [&](std::size_t i) { return i < t.size() && t[i] >= '0' && t[i] <= '9'; };
    std::size_t n = 0;
    bool in_run = false;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const char32_t c = t[i];
        const bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if ((c == ',' || c == '.') && i > 0 && digit(i - 1) && digit(i + 1)) continue;
        if (oracle_is_cjk(c)) {
            ++n;
            in_run = false;
        } else if (alnum) {
            if (!in_run) ++n;
            in_run = true;
        } else {
            in_run = false;
        }
    }
    return n;
}

/// Random string over a code-point alphabet, free of leading, trailing and
/// doubled spaces (already in normalized form).
template <class Rng>
std::string random_normalized_text(Rng &rng, const std::vector<char32_t> &alphabet, std::size_t length) {
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::u32string cps;
    while (cps.size() < length) {
        const char32_t c = alphabet[pick(rng)];
        if (c == U' ' && (cps.empty() || cps.back() == U' ' || cps.size() + 1 == length)) continue;
        cps.push_back(c);
    }
    std::string out;
    for (char32_t c : cps) out += encode_utf8(c);
    return out;
}

/// Scoped temporary directory.
class TempDir {
   public:
    explicit TempDir(const std::string &prefix = "hks-test") {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() / (prefix + "-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const noexcept { return path_; }
    std::string file(const std::string &name) const { return (path_ / name).string(); }

    std::string write(const std::string &name, const std::string &content) const {
        const auto p = file(name);
        std::ofstream(p, std::ios::binary) << content;
        return p;
    }

   private:
    std::filesystem::path path_;
};

}  // namespace hks::testing
