#pragma once

// Text normalization, UTF-8 helpers and UAX #29 token counting, backed by ICU.

#include <unicode/brkiter.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "hks/error.hpp"

namespace hks {

struct NormalizeOptions {
    bool nfc = true;
    bool casefold = true;
    bool collapse_whitespace = true;

    bool operator==(const NormalizeOptions &) const = default;
};

namespace unicode {

/// Han, Hiragana and Katakana. These scripts have no word delimiters.
inline bool is_cjk(UChar32 c) {
    if (c < 0x2E80) return false;
    if (u_hasBinaryProperty(c, UCHAR_IDEOGRAPHIC)) return true;
    UErrorCode status = U_ZERO_ERROR;
    const UScriptCode script = uscript_getScript(c, &status);
    if (U_FAILURE(status)) return false;
    return script == USCRIPT_HAN || script == USCRIPT_HIRAGANA || script == USCRIPT_KATAKANA;
}

/// Word characters for the match boundary rule: letters, digits, marks and
/// underscore, excluding CJK.
inline bool is_word_char(UChar32 c) {
    if (c < 0x80) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_';
    }
    if (is_cjk(c)) return false;
    return u_isalnum(c) || (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0;
}

inline bool is_valid_utf8(std::string_view s) {
    const auto *p = reinterpret_cast<const uint8_t *>(s.data());
    const auto len = static_cast<int32_t>(s.size());
    int32_t i = 0;
    while (i < len) {
        UChar32 c;
        U8_NEXT(p, i, len, c);
        if (c < 0) return false;
    }
    return true;
}

/// Number of Unicode scalar values; invalid bytes count as one each.
inline std::size_t codepoint_count(std::string_view s) {
    const auto *p = reinterpret_cast<const uint8_t *>(s.data());
    const auto len = static_cast<int32_t>(s.size());
    int32_t i = 0;
    std::size_t n = 0;
    while (i < len) {
        UChar32 c;
        U8_NEXT(p, i, len, c);
        ++n;
    }
    return n;
}

/// Code point starting at byte offset `pos`, or -1 at end of string.
inline UChar32 codepoint_at(std::string_view s, std::size_t pos) {
    if (pos >= s.size()) return -1;
    const auto *p = reinterpret_cast<const uint8_t *>(s.data());
    auto i = static_cast<int32_t>(pos);
    UChar32 c;
    U8_NEXT(p, i, static_cast<int32_t>(s.size()), c);
    return c;
}

/// Code point ending just before byte offset `pos`, or -1 at start of string.
inline UChar32 codepoint_before(std::string_view s, std::size_t pos) {
    if (pos == 0 || pos > s.size()) return -1;
    const auto *p = reinterpret_cast<const uint8_t *>(s.data());
    auto i = static_cast<int32_t>(pos);
    UChar32 c;
    U8_PREV(p, 0, i, c);
    return c;
}

inline bool contains_cjk(std::string_view s) {
    const auto *p = reinterpret_cast<const uint8_t *>(s.data());
    const auto len = static_cast<int32_t>(s.size());
    int32_t i = 0;
    while (i < len) {
        UChar32 c;
        U8_NEXT(p, i, len, c);
        if (c >= 0 && is_cjk(c)) return true;
    }
    return false;
}

inline icu::UnicodeString normalize_unicode(icu::UnicodeString text, const NormalizeOptions &opt) {
    if (opt.casefold) text.foldCase(U_FOLD_CASE_DEFAULT);
    if (opt.nfc) {
        UErrorCode status = U_ZERO_ERROR;
        const icu::Normalizer2 *nfc = icu::Normalizer2::getNFCInstance(status);
        if (U_FAILURE(status)) throw ResourceError("ICU NFC normalizer unavailable");
        if (nfc->quickCheck(text, status) != UNORM_YES) {
            icu::UnicodeString out = nfc->normalize(text, status);
            if (U_FAILURE(status)) throw ResourceError("ICU NFC normalization failed");
            text = std::move(out);
        }
    }
    if (opt.collapse_whitespace) {
        icu::UnicodeString out;
        bool pending_space = false;
        for (int32_t i = 0; i < text.length();) {
            const UChar32 c = text.char32At(i);
            i += U16_LENGTH(c);
            if (u_isUWhiteSpace(c)) {
                pending_space = true;
                continue;
            }
            if (pending_space && !out.isEmpty()) out.append(static_cast<UChar>(u' '));
            pending_space = false;
            out.append(c);
        }
        text = std::move(out);
    }
    return text;
}

/// NFC + full case folding + whitespace collapse (each step optional).
/// Invalid UTF-8 sequences become U+FFFD.
inline std::string normalize(std::string_view utf8, const NormalizeOptions &opt = {}) {
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    std::string out;
    normalize_unicode(std::move(u), opt).toUTF8String(out);
    return out;
}

/// Counts tokens under UAX #29 word segmentation: every word-like segment
/// counts once, except that each CJK character is its own token.
/// Not thread-safe; keep one instance per worker.
class TokenCounter {
   public:
    TokenCounter() {
        UErrorCode status = U_ZERO_ERROR;
        iter_.reset(icu::BreakIterator::createWordInstance(icu::Locale::getRoot(), status));
        if (U_FAILURE(status) || !iter_) throw ResourceError("ICU word break iterator unavailable");
    }

    std::size_t count(const icu::UnicodeString &text) {
        if (text.isEmpty()) return 0;
        iter_->setText(text);
        std::size_t tokens = 0;
        int32_t start = iter_->first();
        for (int32_t end = iter_->next(); end != icu::BreakIterator::DONE;
             start = end, end = iter_->next()) {
            if (iter_->getRuleStatus() < UBRK_WORD_NONE_LIMIT) continue;
            bool in_run = false;
            for (int32_t i = start; i < end;) {
                const UChar32 c = text.char32At(i);
                i += U16_LENGTH(c);
                if (is_cjk(c)) {
                    ++tokens;
                    in_run = false;
                } else if (!in_run) {
                    ++tokens;
                    in_run = true;
                }
            }
        }
        return tokens;
    }

    std::size_t count(std::string_view utf8) {
        const icu::UnicodeString u = icu::UnicodeString::fromUTF8(
            icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
        return count(u);
    }

   private:
    std::unique_ptr<icu::BreakIterator> iter_;
};

/// Normalized UTF-8 text together with its token count.
struct PreparedText {
    std::string text;
    std::size_t n_p = 0;
};

/// Normalizes document text and counts its tokens in one UTF-16 round trip.
class TextPreparer {
   public:
    explicit TextPreparer(NormalizeOptions opt = {}) : opt_(opt) {}

    PreparedText prepare(std::string_view utf8) {
        icu::UnicodeString u = icu::UnicodeString::fromUTF8(
            icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
        u = normalize_unicode(std::move(u), opt_);
        PreparedText out;
        out.n_p = counter_.count(u);
        u.toUTF8String(out.text);
        return out;
    }

    const NormalizeOptions &options() const noexcept { return opt_; }

   private:
    NormalizeOptions opt_;
    TokenCounter counter_;
};

}  // namespace unicode
}  // namespace hks
