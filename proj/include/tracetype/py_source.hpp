#pragma once

// A lossless-offset scanner for Python source: tokenizes, splits logical
// lines and indexes function/class headers, their parameters and existing
// annotations, and top-level imports. Enough structure to insert
// annotations without touching any other byte of the file.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracetype::py {

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(int line, std::string const& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

enum class Tok { name, number, string, op, newline, end };

struct Token {
    Tok kind;
    std::size_t begin;
    std::size_t end;
    int line;
    int col; // tab-expanded column of the first character
    std::string_view text;

    bool is_op(std::string_view s) const { return kind == Tok::op && text == s; }
    bool is_name(std::string_view s) const { return kind == Tok::name && text == s; }
};

namespace detail {

inline bool is_name_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
inline bool is_name_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

inline bool is_string_prefix(std::string_view p) {
    std::string lower;
    for (char c : p) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    static const std::set<std::string> ok = {"r", "u", "f", "b", "br", "rb", "fr", "rf"};
    return ok.contains(lower);
}

} // namespace detail

/// Tokenizes `src`. Comments and non-logical newlines are dropped; a
/// newline token terminates every nonblank logical line.
inline std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    std::size_t line_start = 0;
    int depth = 0;
    bool line_has_tokens = false;
    std::vector<int> open_lines;

    auto column = [&](std::size_t pos) {
        int col = 0;
        for (std::size_t k = line_start; k < pos; ++k) col = src[k] == '\t' ? (col / 8 + 1) * 8 : col + 1;
        return col;
    };
    auto emit = [&](Tok kind, std::size_t b, std::size_t e, int tok_line, int col) {
        out.push_back({kind, b, e, tok_line, col, src.substr(b, e - b)});
        line_has_tokens = true;
    };

    while (i < src.size()) {
        char c = src[i];
        if (c == '\n' || c == '\r') {
            std::size_t nl_begin = i;
            if (c == '\r' && i + 1 < src.size() && src[i + 1] == '\n') ++i;
            ++i;
            if (depth == 0 && line_has_tokens) {
                out.push_back({Tok::newline, nl_begin, i, line, column(nl_begin), src.substr(nl_begin, i - nl_begin)});
                line_has_tokens = false;
            }
            ++line;
            line_start = i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\f') {
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n' && src[i] != '\r') ++i;
            continue;
        }
        if (c == '\\') {
            std::size_t k = i + 1;
            if (k < src.size() && (src[k] == '\n' || src[k] == '\r')) {
                if (src[k] == '\r' && k + 1 < src.size() && src[k + 1] == '\n') ++k;
                i = k + 1;
                ++line;
                line_start = i;
                continue;
            }
            throw SyntaxError(line, "unexpected character after line continuation");
        }
        std::size_t start = i;
        int start_line = line;
        int col = column(i);

        // names, possibly a string prefix
        if (detail::is_name_start(static_cast<unsigned char>(c))) {
            while (i < src.size() && detail::is_name_char(static_cast<unsigned char>(src[i]))) ++i;
            if (i < src.size() && (src[i] == '"' || src[i] == '\'') && i - start <= 2 &&
                detail::is_string_prefix(src.substr(start, i - start))) {
                c = src[i];
            } else {
                emit(Tok::name, start, i, start_line, col);
                continue;
            }
        }
        if (c == '"' || c == '\'') {
            char q = src[i];
            bool triple = i + 2 < src.size() && src[i + 1] == q && src[i + 2] == q;
            i += triple ? 3 : 1;
            bool closed = false;
            while (i < src.size()) {
                char d = src[i];
                if (d == '\\') {
                    // escapes the next character even in raw strings, for tokenizing purposes
                    if (i + 1 < src.size() && src[i + 1] == '\n') {
                        ++line;
                        line_start = i + 2;
                    }
                    i += 2;
                    continue;
                }
                if (d == '\n') {
                    if (!triple) throw SyntaxError(start_line, "unterminated string literal");
                    ++line;
                    ++i;
                    line_start = i;
                    continue;
                }
                if (d == q) {
                    if (!triple) {
                        ++i;
                        closed = true;
                        break;
                    }
                    if (i + 2 < src.size() && src[i + 1] == q && src[i + 2] == q) {
                        i += 3;
                        closed = true;
                        break;
                    }
                }
                ++i;
            }
            if (!closed) throw SyntaxError(start_line, "unterminated string literal");
            emit(Tok::string, start, i, start_line, col);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            while (i < src.size()) {
                char d = src[i];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
                    bool exp = (d == 'e' || d == 'E');
                    ++i;
                    if (exp && i < src.size() && (src[i] == '+' || src[i] == '-')) ++i;
                    continue;
                }
                break;
            }
            emit(Tok::number, start, i, start_line, col);
            continue;
        }
        static constexpr std::string_view three[] = {"**=", "//=", ">>=", "<<=", "..."};
        static constexpr std::string_view two[] = {"->", "**", "//", "==", "!=", "<=", ">=", "<<", ">>", ":=",
                                                   "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@="};
        std::size_t len = 1;
        for (auto op : three)
            if (src.substr(i, 3) == op) len = 3;
        if (len == 1)
            for (auto op : two)
                if (src.substr(i, 2) == op) len = 2;
        if (len == 1) {
            if (c == '(' || c == '[' || c == '{') {
                ++depth;
                open_lines.push_back(line);
            } else if (c == ')' || c == ']' || c == '}') {
                if (depth == 0) throw SyntaxError(line, std::string("unmatched '") + c + "'");
                --depth;
                open_lines.pop_back();
            } else if (std::string_view("+-*/%@&|^~<>=.,:;!").find(c) == std::string_view::npos) {
                throw SyntaxError(line, std::string("invalid character '") + c + "'");
            }
        }
        i += len;
        emit(Tok::op, start, i, start_line, col);
    }
    if (depth != 0) throw SyntaxError(open_lines.back(), "unclosed bracket");
    if (line_has_tokens) out.push_back({Tok::newline, src.size(), src.size(), line, 0, {}});
    out.push_back({Tok::end, src.size(), src.size(), line, 0, {}});
    return out;
}

// ----------------------------------------------------------------- structure

struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(Span const&) const = default;
};

enum class ParamKind { regular, var_positional, var_keyword, kw_marker, pos_marker };

struct Param {
    std::string name;
    ParamKind kind = ParamKind::regular;
    std::size_t name_end = 0;
    std::optional<Span> annotation;      // expression only
    std::size_t annotation_colon = 0;    // offset of ':' when annotated
    std::optional<Span> default_value;   // expression only
    std::string annotation_text;
    std::string default_text;
};

/// One enclosing `if`/`elif`/`else` arm: the arm's own condition (absent for
/// else) and the conditions of the arms before it in the same chain.
struct Condition {
    std::optional<std::string> test;
    std::vector<std::string> prior;
};

struct FunctionDef {
    std::string name;
    std::string qualname;
    int first_line = 0; // first decorator, else the def line
    int def_line = 0;
    bool is_async = false;
    bool has_yield = false;
    int indent = 0;
    std::size_t name_end = 0;
    std::optional<Span> type_params; // including brackets
    std::vector<Param> params;
    std::size_t close_paren = 0;
    std::optional<Span> return_annotation;
    std::string return_annotation_text;
    std::size_t arrow = 0;
    std::size_t header_colon = 0;
    std::vector<std::string> decorators;
    std::optional<std::string> enclosing_class; // qualname, when directly in a class body
    std::size_t top_statement_start = 0;        // line start of the outermost enclosing statement
    std::vector<Condition> conditions;
};

struct ClassDef {
    std::string name;
    std::string qualname;
    int line = 0;
    int first_line = 0;
    std::size_t offset = 0;
    std::vector<std::string> bases;
    std::vector<Condition> conditions;
    bool top_level = false;
};

struct ImportName {
    std::string name;
    std::string as_name;
};

struct ImportStmt {
    bool is_from = false;
    std::string module; // with leading dots for relative imports
    std::vector<ImportName> names;
    int line = 0;
    std::size_t end = 0; // end of the logical line, including its newline
};

/// Module-level assignment `name = <expr>` or `name: <ann> = <expr>`.
struct Assignment {
    std::string target;
    std::string value_text;
    std::vector<Condition> conditions;
};

struct ModuleIndex {
    std::vector<FunctionDef> functions;
    std::vector<ClassDef> classes;
    std::vector<ImportStmt> imports; // module-level, any position
    std::vector<Assignment> assignments; // module-level
    std::set<std::string> top_level_names;
    std::size_t import_insert_offset = 0; // where new imports go
    bool insert_after_existing_imports = false;

    FunctionDef const* find(std::string_view qualname, int first_line) const {
        for (auto const& f : functions)
            if (f.qualname == qualname && (first_line == 0 || f.first_line == first_line || f.def_line == first_line))
                return &f;
        return nullptr;
    }
};

namespace detail {

struct LogicalLine {
    std::size_t first; // token index
    std::size_t last;  // index of the newline token
};

inline std::string strip(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n\\");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n\\");
    return std::string(s.substr(b, e - b + 1));
}

/// Collapses internal runs of whitespace/newlines/continuations.
inline std::string normalize_space(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\\' && i + 1 < s.size() && (s[i + 1] == '\n' || s[i + 1] == '\r')) {
            pending_space = true;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

inline std::size_t line_start_of(std::string_view src, std::size_t pos) {
    while (pos > 0 && src[pos - 1] != '\n' && src[pos - 1] != '\r') --pos;
    return pos;
}

struct Block {
    enum Kind { function, klass, cond, other } kind;
    int indent;
    std::string qualname;
    std::size_t function_index = 0;
    Condition condition;
};

} // namespace detail

/// Builds the structural index of a module. Throws SyntaxError on malformed
/// headers or unbalanced tokens.
inline ModuleIndex scan_module(std::string_view src) {
    auto toks = tokenize(src);
    ModuleIndex idx;

    std::vector<detail::LogicalLine> lines;
    for (std::size_t i = 0, first = 0; i < toks.size(); ++i) {
        if (toks[i].kind == Tok::newline) {
            lines.push_back({first, i});
            first = i + 1;
        }
    }

    std::vector<detail::Block> stack;
    int pending_decorator_line = 0;
    std::size_t pending_decorator_offset = 0;
    std::vector<std::string> pending_decorators;
    std::map<int, std::vector<std::string>> chains; // open if/elif chains by indent
    bool in_header_phase = true; // module prologue: docstring, __future__, imports
    bool seen_statement = false;
    std::size_t top_statement_start = 0;

    auto current_conditions = [&] {
        std::vector<Condition> conds;
        for (auto const& b : stack)
            if (b.kind == detail::Block::cond) conds.push_back(b.condition);
        return conds;
    };
    auto qual_prefix = [&]() -> std::string {
        for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
            if (it->kind == detail::Block::function) return it->qualname + ".<locals>.";
            if (it->kind == detail::Block::klass) return it->qualname + ".";
        }
        return "";
    };
    auto direct_class = [&]() -> std::optional<std::string> {
        for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
            if (it->kind == detail::Block::cond) continue;
            if (it->kind == detail::Block::klass) return it->qualname;
            return std::nullopt;
        }
        return std::nullopt;
    };
    auto innermost_function = [&]() -> FunctionDef* {
        for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
            if (it->kind == detail::Block::function) return &idx.functions[it->function_index];
            if (it->kind == detail::Block::klass) return nullptr;
        }
        return nullptr;
    };
    auto text_between = [&](std::size_t b, std::size_t e) { return std::string(src.substr(b, e - b)); };

    for (auto const& ll : lines) {
        Token const& head = toks[ll.first];
        int indent = head.col;
        while (!stack.empty() && stack.back().indent >= indent) stack.pop_back();
        bool top_level = stack.empty();
        if (top_level && pending_decorators.empty()) top_statement_start = detail::line_start_of(src, head.begin);

        std::size_t k = ll.first;
        auto at = [&](std::size_t j) -> Token const& { return toks[std::min(j, ll.last)]; };

        // conditional chains (tracked at any depth for stub evaluation)
        bool is_if = head.is_name("if"), is_elif = head.is_name("elif"), is_else = head.is_name("else");
        if (is_if || is_elif || is_else) {
            // header colon: last ':' at depth 0 on the line that ends the test
            std::size_t colon = k + 1;
            int depth = 0;
            for (std::size_t j = k + 1; j < ll.last; ++j) {
                auto const& t = toks[j];
                if (t.is_op("(") || t.is_op("[") || t.is_op("{")) ++depth;
                else if (t.is_op(")") || t.is_op("]") || t.is_op("}")) --depth;
                else if (depth == 0 && t.is_op(":")) {
                    colon = j;
                    break;
                }
            }
            chains.erase(chains.upper_bound(indent), chains.end());
            if (is_if) chains[indent].clear();
            detail::Block blk{detail::Block::cond, indent, "", 0, {}};
            blk.condition.prior = chains[indent];
            if (!is_else) {
                auto test = detail::normalize_space(text_between(toks[k + 1].begin, toks[colon].begin));
                blk.condition.test = test;
                chains[indent].push_back(test);
            } else {
                chains.erase(indent);
            }
            if (top_level) in_header_phase = false;
            // one-line body after the colon is ignored structurally
            if (colon + 1 >= ll.last) stack.push_back(std::move(blk));
            seen_statement = true;
            continue;
        }
        chains.erase(chains.lower_bound(indent), chains.end());

        if (head.is_op("@")) {
            if (pending_decorators.empty()) {
                pending_decorator_line = head.line;
                pending_decorator_offset = detail::line_start_of(src, head.begin);
            }
            pending_decorators.push_back(
                detail::normalize_space(text_between(toks[k + 1].begin, toks[ll.last - 1].end)));
            continue;
        }

        bool is_async = false;
        if (head.is_name("async") && at(k + 1).is_name("def")) {
            is_async = true;
            ++k;
        }

        if (toks[k].is_name("def")) {
            FunctionDef fn;
            fn.is_async = is_async;
            fn.def_line = head.line;
            fn.first_line = pending_decorators.empty() ? head.line : pending_decorator_line;
            fn.decorators = std::move(pending_decorators);
            pending_decorators.clear();
            fn.indent = indent;
            fn.top_statement_start = top_statement_start;
            fn.conditions = current_conditions();
            fn.enclosing_class = direct_class();
            auto const& name_tok = at(k + 1);
            if (name_tok.kind != Tok::name) throw SyntaxError(head.line, "expected function name");
            fn.name = std::string(name_tok.text);
            fn.qualname = qual_prefix() + fn.name;
            fn.name_end = name_tok.end;
            std::size_t j = k + 2;
            if (at(j).is_op("[")) {
                std::size_t b = at(j).begin;
                int depth = 0;
                for (; j < ll.last; ++j) {
                    if (toks[j].is_op("[")) ++depth;
                    if (toks[j].is_op("]") && --depth == 0) break;
                }
                fn.type_params = Span{b, at(j).end};
                ++j;
            }
            if (!at(j).is_op("(")) throw SyntaxError(head.line, "expected '(' after function name");
            // parameters
            ++j;
            std::vector<std::vector<std::size_t>> groups(1);
            int depth = 0;
            for (; j < ll.last; ++j) {
                auto const& t = toks[j];
                if (t.is_op("(") || t.is_op("[") || t.is_op("{")) ++depth;
                if (t.is_op(")") || t.is_op("]") || t.is_op("}")) {
                    if (depth == 0) break;
                    --depth;
                }
                if (depth == 0 && t.is_op(",")) {
                    groups.emplace_back();
                    continue;
                }
                groups.back().push_back(j);
            }
            if (!at(j).is_op(")")) throw SyntaxError(head.line, "unterminated parameter list");
            fn.close_paren = at(j).begin;
            for (auto const& g : groups) {
                if (g.empty()) continue;
                Param p;
                std::size_t q = 0;
                auto const& first = toks[g[0]];
                if (first.is_op("*") || first.is_op("**")) {
                    p.kind = first.is_op("*") ? ParamKind::var_positional : ParamKind::var_keyword;
                    q = 1;
                    if (g.size() == 1) {
                        p.kind = ParamKind::kw_marker;
                        p.name = "*";
                        p.name_end = first.end;
                        fn.params.push_back(std::move(p));
                        continue;
                    }
                } else if (first.is_op("/")) {
                    p.kind = ParamKind::pos_marker;
                    p.name = "/";
                    p.name_end = first.end;
                    fn.params.push_back(std::move(p));
                    continue;
                }
                auto const& nt = toks[g[q]];
                if (nt.kind != Tok::name) throw SyntaxError(nt.line, "expected parameter name");
                p.name = std::string(nt.text);
                p.name_end = nt.end;
                ++q;
                if (q < g.size() && toks[g[q]].is_op(":")) {
                    p.annotation_colon = toks[g[q]].begin;
                    std::size_t ab = q + 1, ae = ab;
                    int d = 0;
                    for (; ae < g.size(); ++ae) {
                        auto const& t = toks[g[ae]];
                        if (t.is_op("(") || t.is_op("[") || t.is_op("{")) ++d;
                        if (t.is_op(")") || t.is_op("]") || t.is_op("}")) --d;
                        if (d == 0 && t.is_op("=")) break;
                    }
                    if (ab >= ae) throw SyntaxError(nt.line, "empty annotation");
                    p.annotation = Span{toks[g[ab]].begin, toks[g[ae - 1]].end};
                    p.annotation_text = detail::normalize_space(text_between(p.annotation->begin, p.annotation->end));
                    q = ae;
                }
                if (q < g.size() && toks[g[q]].is_op("=")) {
                    if (q + 1 >= g.size()) throw SyntaxError(nt.line, "missing default value");
                    p.default_value = Span{toks[g[q + 1]].begin, toks[g.back()].end};
                    p.default_text = detail::normalize_space(text_between(p.default_value->begin, p.default_value->end));
                }
                fn.params.push_back(std::move(p));
            }
            ++j;
            if (at(j).is_op("->")) {
                fn.arrow = at(j).begin;
                std::size_t ab = j + 1;
                int d = 0;
                for (++j; j < ll.last; ++j) {
                    auto const& t = toks[j];
                    if (t.is_op("(") || t.is_op("[") || t.is_op("{")) ++d;
                    if (t.is_op(")") || t.is_op("]") || t.is_op("}")) --d;
                    if (d == 0 && t.is_op(":")) break;
                }
                if (ab >= j) throw SyntaxError(head.line, "empty return annotation");
                fn.return_annotation = Span{toks[ab].begin, toks[j - 1].end};
                fn.return_annotation_text =
                    detail::normalize_space(text_between(fn.return_annotation->begin, fn.return_annotation->end));
            }
            if (!at(j).is_op(":")) throw SyntaxError(head.line, "expected ':' after function header");
            fn.header_colon = at(j).begin;
            // yields on a one-line body
            bool one_liner = j + 1 < ll.last;
            for (std::size_t y = j + 1; y < ll.last; ++y)
                if (toks[y].is_name("yield")) fn.has_yield = true;
            if (top_level) {
                idx.top_level_names.insert(fn.name);
                in_header_phase = false;
            }
            idx.functions.push_back(std::move(fn));
            if (!one_liner)
                stack.push_back({detail::Block::function, indent, idx.functions.back().qualname,
                                 idx.functions.size() - 1, {}});
            seen_statement = true;
            continue;
        }

        if (toks[k].is_name("class")) {
            ClassDef cls;
            cls.line = head.line;
            cls.first_line = pending_decorators.empty() ? head.line : pending_decorator_line;
            cls.offset = pending_decorators.empty() ? detail::line_start_of(src, head.begin) : pending_decorator_offset;
            pending_decorators.clear();
            auto const& name_tok = at(k + 1);
            if (name_tok.kind != Tok::name) throw SyntaxError(head.line, "expected class name");
            cls.name = std::string(name_tok.text);
            cls.qualname = qual_prefix() + cls.name;
            cls.conditions = current_conditions();
            cls.top_level = top_level;
            std::size_t j = k + 2;
            if (at(j).is_op("[")) {
                int d = 0;
                for (; j < ll.last; ++j) {
                    if (toks[j].is_op("[")) ++d;
                    if (toks[j].is_op("]") && --d == 0) break;
                }
                ++j;
            }
            if (at(j).is_op("(")) {
                int d = 0;
                std::size_t b = at(j).end;
                for (++j; j < ll.last; ++j) {
                    auto const& t = toks[j];
                    if (t.is_op("(") || t.is_op("[") || t.is_op("{")) ++d;
                    if (t.is_op(")") || t.is_op("]") || t.is_op("}")) {
                        if (d == 0) break;
                        --d;
                    }
                    if (d == 0 && t.is_op(",")) {
                        auto base = detail::normalize_space(text_between(b, t.begin));
                        if (!base.empty()) cls.bases.push_back(base);
                        b = t.end;
                    }
                }
                auto base = detail::normalize_space(text_between(b, at(j).begin));
                if (!base.empty()) cls.bases.push_back(base);
                ++j;
            }
            bool one_liner = false;
            for (std::size_t c = j; c < ll.last; ++c)
                if (toks[c].is_op(":")) one_liner = c + 1 < ll.last;
            if (top_level) {
                idx.top_level_names.insert(cls.name);
                in_header_phase = false;
            }
            idx.classes.push_back(cls);
            if (!one_liner) stack.push_back({detail::Block::klass, indent, cls.qualname, 0, {}});
            seen_statement = true;
            continue;
        }
        pending_decorators.clear();

        // yields inside function bodies
        if (auto* fn = innermost_function()) {
            for (std::size_t y = ll.first; y < ll.last; ++y)
                if (toks[y].is_name("yield")) fn->has_yield = true;
        }

        // block openers we do not model structurally (for, while, try, with, ...)
        {
            static const std::set<std::string_view> openers = {"for",  "while", "try",   "except", "finally",
                                                                "with", "match", "case"};
            bool opener = openers.contains(head.text) ||
                          (head.is_name("async") && (at(k + 1).is_name("for") || at(k + 1).is_name("with")));
            if (opener && toks[ll.last - 1].is_op(":")) {
                stack.push_back({detail::Block::other, indent, "", 0, {}});
                if (top_level) in_header_phase = false;
                seen_statement = true;
                continue;
            }
        }

        bool in_cond_only = std::all_of(stack.begin(), stack.end(), [](auto const& b) { return b.kind == detail::Block::cond; });
        if (!in_cond_only) continue;

        // module-level statements
        if (head.is_name("import") || head.is_name("from")) {
            ImportStmt imp;
            imp.line = head.line;
            imp.end = toks[ll.last].end;
            std::size_t j = ll.first + 1;
            if (head.is_name("from")) {
                imp.is_from = true;
                while (j < ll.last && !toks[j].is_name("import")) imp.module += toks[j++].text;
                ++j;
            }
            std::vector<std::string> parts;
            std::string current, alias;
            bool in_alias = false;
            auto flush = [&] {
                if (!current.empty()) imp.names.push_back({current, alias});
                current.clear();
                alias.clear();
                in_alias = false;
            };
            for (; j < ll.last; ++j) {
                auto const& t = toks[j];
                if (t.is_op("(") || t.is_op(")")) continue;
                if (t.is_op(",")) {
                    flush();
                    continue;
                }
                if (t.is_name("as")) {
                    in_alias = true;
                    continue;
                }
                if (in_alias) alias = std::string(t.text);
                else current += t.text;
            }
            flush();
            for (auto const& n : imp.names) {
                std::string bound = !n.as_name.empty() ? n.as_name
                                    : imp.is_from    ? n.name
                                                     : n.name.substr(0, n.name.find('.'));
                if (stack.empty()) idx.top_level_names.insert(bound);
            }
            if (stack.empty() && in_header_phase) {
                idx.import_insert_offset = imp.end;
                idx.insert_after_existing_imports = true;
            }
            idx.imports.push_back(std::move(imp));
            seen_statement = true;
            continue;
        }
        if (stack.empty() && in_header_phase) {
            bool docstring = !seen_statement && head.kind == Tok::string && ll.last == ll.first + 1;
            if (docstring) {
                if (!idx.insert_after_existing_imports) idx.import_insert_offset = toks[ll.last].end;
                seen_statement = true;
                continue;
            }
            in_header_phase = false;
        }
        // module-level assignment targets
        if (head.kind == Tok::name) {
            auto const& next = at(ll.first + 1);
            if (next.is_op("=") || next.is_op(":")) {
                Assignment a;
                a.target = std::string(head.text);
                a.conditions = current_conditions();
                std::size_t j = ll.first + 1;
                if (next.is_op(":")) {
                    while (j < ll.last && !toks[j].is_op("=")) ++j;
                }
                if (j < ll.last && toks[j].is_op("="))
                    a.value_text = detail::normalize_space(text_between(toks[j + 1].begin, toks[ll.last - 1].end));
                if (stack.empty()) idx.top_level_names.insert(a.target);
                idx.assignments.push_back(std::move(a));
            }
        }
        seen_statement = true;
    }
    return idx;
}

} // namespace tracetype::py
