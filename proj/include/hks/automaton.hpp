#pragma once

// Byte-level Aho-Corasick automaton over normalized pool surfaces.
//
// States are numbered in breadth-first order, so the children of state v
// occupy the contiguous id range [first_child[v], first_child[v + 1]) and
// only a one-byte label is stored per edge. Construction groups the
// lexicographically sorted surfaces level by level instead of inserting
// them one at a time.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <new>
#include <string>
#include <string_view>
#include <vector>

#include "hks/error.hpp"
#include "hks/pool.hpp"
#include "hks/unicode.hpp"

namespace hks {

struct AutomatonOptions {
    /// Apply the word-boundary rule to surfaces without CJK characters.
    bool word_boundaries = true;
};

struct Match {
    uint32_t pattern = 0;
    /// Byte offsets into the matched text, [begin, end).
    std::size_t begin = 0;
    std::size_t end = 0;

    bool operator==(const Match &) const = default;
};

class Automaton {
   public:
    static constexpr uint32_t kNone = std::numeric_limits<uint32_t>::max();

    explicit Automaton(const KnowledgePool &pool, AutomatonOptions options = {})
        : options_(options) {
        if (pool.empty()) throw EmptyPoolError("cannot build automaton from an empty pool");
        try {
            build(pool);
        } catch (const std::bad_alloc &) {
            throw ResourceError("out of memory building automaton for " +
                                std::to_string(pool.total()) + " patterns");
        }
    }

    std::size_t state_count() const noexcept { return fail_.size(); }
    std::size_t pattern_count() const noexcept { return pattern_len_.size(); }
    const AutomatonOptions &options() const noexcept { return options_; }

    std::size_t memory_bytes() const noexcept {
        return first_child_.capacity() * 4 + label_.capacity() + fail_.capacity() * 4 +
               out_.capacity() * 4 + terminal_.capacity() * 4 + pattern_len_.capacity() * 4 +
               pattern_flags_.capacity() + sizeof(root_next_);
    }

    /// Calls on_match(Match) for every occurrence of every pattern in `text`,
    /// including overlapping and nested occurrences, in order of match end.
    template <class OnMatch>
    void scan(std::string_view text, OnMatch &&on_match) const {
        uint32_t state = 0;
        const auto *bytes = reinterpret_cast<const uint8_t *>(text.data());
        for (std::size_t i = 0; i < text.size(); ++i) {
            const uint8_t b = bytes[i];
            uint32_t next = kNone;
            while (state != 0 && (next = child(state, b)) == kNone) state = fail_[state];
            if (state == 0) next = root_next_[b];
            state = next == kNone ? 0 : next;

            for (uint32_t u = terminal_[state] != kNone ? state : out_[state]; u != kNone;
                 u = out_[u]) {
                const uint32_t pid = terminal_[u];
                const std::size_t end = i + 1;
                const std::size_t begin = end - pattern_len_[pid];
                if (accept_boundaries(text, pid, begin, end)) on_match(Match{pid, begin, end});
            }
        }
    }

    std::vector<Match> find_all(std::string_view text) const {
        std::vector<Match> out;
        scan(text, [&](const Match &m) { out.push_back(m); });
        return out;
    }

   private:
    enum : uint8_t { kCheckStart = 1, kCheckEnd = 2 };

    uint32_t child(uint32_t state, uint8_t b) const noexcept {
        if (state == 0) return root_next_[b];
        const uint32_t lo = first_child_[state];
        const uint32_t hi = first_child_[state + 1];
        if (hi - lo <= 8) {
            for (uint32_t c = lo; c < hi; ++c) {
                if (label_[c] == b) return c;
            }
            return kNone;
        }
        const auto *first = label_.data() + lo;
        const auto *last = label_.data() + hi;
        const auto *it = std::lower_bound(first, last, b);
        return (it != last && *it == b) ? static_cast<uint32_t>(it - label_.data()) : kNone;
    }

    bool accept_boundaries(std::string_view text, uint32_t pid, std::size_t begin,
                           std::size_t end) const {
        const uint8_t flags = pattern_flags_[pid];
        if (flags & kCheckStart) {
            const UChar32 c = unicode::codepoint_before(text, begin);
            if (c >= 0 && unicode::is_word_char(c)) return false;
        }
        if (flags & kCheckEnd) {
            const UChar32 c = unicode::codepoint_at(text, end);
            if (c >= 0 && unicode::is_word_char(c)) return false;
        }
        return true;
    }

    void build(const KnowledgePool &pool) {
        const auto elements = pool.elements();
        const auto order = pool.sorted_order();

        pattern_len_.resize(elements.size());
        pattern_flags_.assign(elements.size(), 0);
        for (std::size_t i = 0; i < elements.size(); ++i) {
            const std::string &s = elements[i].surface;
            pattern_len_[i] = static_cast<uint32_t>(s.size());
            if (options_.word_boundaries && !s.empty() && !unicode::contains_cjk(s)) {
                uint8_t f = 0;
                if (unicode::is_word_char(unicode::codepoint_at(s, 0))) f |= kCheckStart;
                if (unicode::is_word_char(unicode::codepoint_before(s, s.size()))) f |= kCheckEnd;
                pattern_flags_[i] = f;
            }
        }

        struct Range {
            uint32_t lo, hi;
        };
        // Ranges of sorted patterns sharing each current-level state's prefix,
        // indexed by state id minus the level's first id.
        std::vector<Range> level{{0, static_cast<uint32_t>(order.size())}};
        label_.push_back(0);
        terminal_.push_back(kNone);
        std::size_t depth = 0;
        uint32_t level_first = 0;
        while (!level.empty()) {
            std::vector<Range> next_level;
            for (std::size_t k = 0; k < level.size(); ++k) {
                const uint32_t state = level_first + static_cast<uint32_t>(k);
                first_child_.push_back(static_cast<uint32_t>(label_.size()));
                uint32_t i = level[k].lo;
                const uint32_t hi = level[k].hi;
                // The sort puts the pattern equal to the prefix itself first.
                if (i < hi && elements[order[i]].surface.size() == depth) {
                    if (depth > 0) terminal_[state] = order[i];
                    ++i;
                }
                while (i < hi) {
                    const auto b = static_cast<uint8_t>(elements[order[i]].surface[depth]);
                    uint32_t j = i + 1;
                    while (j < hi && static_cast<uint8_t>(elements[order[j]].surface[depth]) == b) ++j;
                    label_.push_back(b);
                    terminal_.push_back(kNone);
                    next_level.push_back({i, j});
                    i = j;
                }
            }
            level_first += static_cast<uint32_t>(level.size());
            level = std::move(next_level);
            ++depth;
        }
        const auto n = static_cast<uint32_t>(label_.size());
        if (n == kNone) throw ResourceError("automaton state count overflows 32-bit ids");
        first_child_.push_back(n);

        root_next_.fill(kNone);
        for (uint32_t c = first_child_[0]; c < first_child_[1]; ++c) root_next_[label_[c]] = c;

        fail_.assign(n, 0);
        out_.assign(n, kNone);
        for (uint32_t v = 0; v < n; ++v) {
            for (uint32_t c = first_child_[v]; c < first_child_[v + 1]; ++c) {
                uint32_t f = 0;
                if (v != 0) {
                    const uint8_t b = label_[c];
                    uint32_t s = fail_[v];
                    for (;;) {
                        const uint32_t t = child(s, b);
                        if (t != kNone) {
                            f = t;
                            break;
                        }
                        if (s == 0) break;
                        s = fail_[s];
                    }
                }
                fail_[c] = f;
                out_[c] = terminal_[f] != kNone ? f : out_[f];
            }
        }
    }

    AutomatonOptions options_;
    std::vector<uint32_t> first_child_;
    std::vector<uint8_t> label_;
    std::vector<uint32_t> fail_;
    std::vector<uint32_t> out_;
    std::vector<uint32_t> terminal_;
    std::array<uint32_t, 256> root_next_{};
    std::vector<uint32_t> pattern_len_;
    std::vector<uint8_t> pattern_flags_;
};

}  // namespace hks
