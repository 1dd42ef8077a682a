#pragma once

// Line-based unified diff (Myers' O(ND) algorithm).

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

namespace tracetype {

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t b = 0;
    for (std::size_t i = 0; i < text.size(); ++i)
        if (text[i] == '\n') {
            out.push_back(text.substr(b, i + 1 - b));
            b = i + 1;
        }
    if (b < text.size()) out.push_back(text.substr(b));
    return out;
}

namespace detail {

enum class DiffOp { keep, remove, insert };

/// Shortest edit script between `a` and `b`.
inline std::vector<DiffOp> edit_script(std::vector<std::string_view> const& a, std::vector<std::string_view> const& b) {
    const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
    const int max = n + m;
    std::vector<int> v(2 * static_cast<std::size_t>(max) + 2, 0);
    std::vector<std::vector<int>> trace;
    auto at = [&](std::vector<int>& vec, int k) -> int& { return vec[static_cast<std::size_t>(k + max + 1)]; };
    int found_d = 0;
    for (int d = 0; d <= max; ++d) {
        trace.push_back(v);
        bool done = false;
        for (int k = -d; k <= d; k += 2) {
            int x = (k == -d || (k != d && at(v, k - 1) < at(v, k + 1))) ? at(v, k + 1) : at(v, k - 1) + 1;
            int y = x - k;
            while (x < n && y < m && a[static_cast<std::size_t>(x)] == b[static_cast<std::size_t>(y)]) ++x, ++y;
            at(v, k) = x;
            if (x >= n && y >= m) {
                done = true;
                break;
            }
        }
        if (done) {
            found_d = d;
            break;
        }
    }
    std::vector<DiffOp> ops;
    int x = n, y = m;
    for (int d = found_d; d > 0; --d) {
        auto& pv = trace[static_cast<std::size_t>(d)];
        int k = x - y;
        int prev_k = (k == -d || (k != d && at(pv, k - 1) < at(pv, k + 1))) ? k + 1 : k - 1;
        int prev_x = at(pv, prev_k), prev_y = prev_x - prev_k;
        while (x > prev_x && y > prev_y) {
            ops.push_back(DiffOp::keep);
            --x, --y;
        }
        ops.push_back(x == prev_x ? DiffOp::insert : DiffOp::remove);
        x = prev_x, y = prev_y;
    }
    while (x > 0 && y > 0) {
        ops.push_back(DiffOp::keep);
        --x, --y;
    }
    std::reverse(ops.begin(), ops.end());
    return ops;
}

} // namespace detail

/// Standard unified diff with `context` lines around each change. Empty
/// when the texts are equal.
inline std::string unified_diff(std::string_view before, std::string_view after, std::string const& from_name,
                                std::string const& to_name, int context = 3) {
    if (before == after) return {};
    auto a = split_lines(before), b = split_lines(after);
    auto ops = detail::edit_script(a, b);

    struct Line {
        detail::DiffOp op;
        std::size_t ai, bi;
    };
    std::vector<Line> lines;
    std::size_t ai = 0, bi = 0;
    for (auto op : ops) {
        lines.push_back({op, ai, bi});
        if (op != detail::DiffOp::insert) ++ai;
        if (op != detail::DiffOp::remove) ++bi;
    }

    std::string out = "--- " + from_name + "\n+++ " + to_name + "\n";
    auto emit_line = [&](char tag, std::string_view text) {
        out += tag;
        out += text;
        if (text.empty() || text.back() != '\n') out += "\n\\ No newline at end of file\n";
    };
    std::size_t i = 0;
    const auto ctx = static_cast<std::size_t>(context);
    while (i < lines.size()) {
        if (lines[i].op == detail::DiffOp::keep) {
            ++i;
            continue;
        }
        std::size_t start = i >= ctx ? i - ctx : 0;
        std::size_t end = i;
        // extend the hunk while changes are within 2*context of each other
        for (std::size_t j = i; j < lines.size(); ++j) {
            if (lines[j].op != detail::DiffOp::keep) end = j;
            else if (j - end > 2 * ctx) break;
        }
        std::size_t stop = std::min(lines.size(), end + ctx + 1);
        std::size_t a_start = lines[start].ai, b_start = lines[start].bi, a_len = 0, b_len = 0;
        for (std::size_t j = start; j < stop; ++j) {
            if (lines[j].op != detail::DiffOp::insert) ++a_len;
            if (lines[j].op != detail::DiffOp::remove) ++b_len;
        }
        auto range = [](std::size_t s, std::size_t len) {
            std::size_t first = len == 0 ? s : s + 1;
            return std::to_string(first) + (len == 1 ? "" : "," + std::to_string(len));
        };
        out += "@@ -" + range(a_start, a_len) + " +" + range(b_start, b_len) + " @@\n";
        for (std::size_t j = start; j < stop; ++j) {
            switch (lines[j].op) {
            case detail::DiffOp::keep: emit_line(' ', a[lines[j].ai]); break;
            case detail::DiffOp::remove: emit_line('-', a[lines[j].ai]); break;
            case detail::DiffOp::insert: emit_line('+', b[lines[j].bi]); break;
            }
        }
        i = stop;
    }
    return out;
}

} // namespace tracetype
