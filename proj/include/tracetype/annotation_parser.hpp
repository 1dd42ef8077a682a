#pragma once

// Parses annotation expressions (from source or stub files) into TypeSpecs.
// Names are resolved to their defining (module, name) through a caller
// supplied resolver, so the same parser serves stubs and user sources.

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tracetype/py_source.hpp"
#include "tracetype/trace.hpp"

namespace tracetype {

/// Maps a dotted source name to the (module, name) it denotes. Returning
/// nothing means "unknown"; the parser then yields Any.
using NameResolver = std::function<std::optional<QualifiedClass>(std::string const& dotted)>;

namespace detail {

inline bool is_typing_module(std::string_view m) { return m == "typing" || m == "typing_extensions"; }

inline std::set<std::string> const& abc_protocols() {
    static const std::set<std::string> names = {
        "Iterable",       "Iterator",        "Generator",      "AsyncIterable", "AsyncIterator",
        "AsyncGenerator", "Awaitable",       "Coroutine",      "Collection",    "Container",
        "Sequence",       "MutableSequence", "Mapping",        "MutableMapping", "AbstractSet",
        "MutableSet",     "KeysView",        "ValuesView",     "ItemsView",     "MappingView",
        "Reversible",     "Sized",           "Hashable",       "Callable",      "ByteString",
    };
    return names;
}

inline std::optional<std::string> builtin_alias(std::string_view typing_name) {
    static const std::vector<std::pair<std::string_view, std::string_view>> table = {
        {"List", "list"}, {"Dict", "dict"}, {"Set", "set"}, {"FrozenSet", "frozenset"},
        {"Tuple", "tuple"}, {"Type", "type"}, {"Text", "str"},
    };
    for (auto const& [k, v] : table)
        if (k == typing_name) return std::string(v);
    return std::nullopt;
}

class AnnotationParser {
public:
    AnnotationParser(std::string_view text, NameResolver const& resolve, int depth)
        : toks_(py::tokenize(text)), resolve_(resolve), depth_(depth) {}

    TypeSpec parse() {
        auto t = union_expr();
        if (peek().kind != py::Tok::newline && peek().kind != py::Tok::end) return make_any();
        return t;
    }

private:
    py::Token const& peek() const {
        static const py::Token end{py::Tok::end, 0, 0, 0, 0, {}};
        return pos_ < toks_.size() ? toks_[pos_] : end;
    }
    py::Token const& next() {
        auto const& t = peek();
        if (pos_ < toks_.size()) ++pos_;
        return t;
    }
    bool accept(std::string_view op) {
        if (peek().is_op(op)) {
            ++pos_;
            return true;
        }
        return false;
    }

    TypeSpec union_expr() {
        std::vector<TypeSpec> members{primary()};
        while (accept("|")) members.push_back(primary());
        return members.size() == 1 ? members.front() : make_union(std::move(members));
    }

    std::vector<TypeSpec> subscript_args() {
        std::vector<TypeSpec> args;
        if (accept("]")) return args;
        do {
            if (peek().is_op("]")) break;
            if (accept("...")) {
                args.push_back(make_ellipsis());
                continue;
            }
            if (peek().is_op("(") && pos_ + 1 < toks_.size() && toks_[pos_ + 1].is_op(")")) {
                pos_ += 2; // tuple[()]
                continue;
            }
            if (accept("[")) {
                // Callable parameter list; its contents are not modelled
                int d = 1;
                while (d > 0 && peek().kind != py::Tok::end) {
                    if (peek().is_op("[")) ++d;
                    if (peek().is_op("]")) --d;
                    next();
                }
                args.push_back(make_any());
                continue;
            }
            args.push_back(union_expr());
        } while (accept(","));
        accept("]");
        return args;
    }

    TypeSpec primary() {
        auto const& t = next();
        if (t.kind == py::Tok::string) {
            if (depth_ > 4) return make_any();
            auto body = t.text;
            auto q = body.find_first_of("'\"");
            std::size_t qlen = body.substr(q).starts_with("\"\"\"") || body.substr(q).starts_with("'''") ? 3 : 1;
            auto inner = body.substr(q + qlen, body.size() - q - 2 * qlen);
            return AnnotationParser(inner, resolve_, depth_ + 1).parse();
        }
        if (t.is_op("(")) {
            auto inner = union_expr();
            accept(")");
            return inner;
        }
        if (t.kind != py::Tok::name) return make_any();
        std::string dotted(t.text);
        while (peek().is_op(".") && pos_ + 1 < toks_.size() && toks_[pos_ + 1].kind == py::Tok::name) {
            ++pos_;
            dotted += "." + std::string(next().text);
        }
        std::optional<std::vector<TypeSpec>> args;
        if (accept("[")) args = subscript_args();
        return build(dotted, std::move(args));
    }

    TypeSpec build(std::string const& dotted, std::optional<std::vector<TypeSpec>> args) {
        if (dotted == "None") return make_none();
        auto where = resolve_ ? resolve_(dotted) : std::nullopt;
        if (!where) {
            static const std::set<std::string> builtins = {
                "int",   "float", "complex",   "str",  "bytes",  "bytearray", "bool",      "object",
                "list",  "dict",  "set",       "frozenset", "tuple", "type",  "range",     "slice",
                "memoryview", "BaseException", "Exception", "property", "staticmethod", "classmethod",
            };
            if (builtins.contains(dotted)) where = QualifiedClass{"builtins", dotted};
            else return make_any();
        }
        auto const& [module, name] = *where;
        if (is_typing_module(module)) {
            if (name == "Any") return make_any();
            if (name == "Self") return make_self();
            if (name == "Never" || name == "NoReturn") return make_never();
            if (name == "Optional") {
                if (!args || args->empty()) return make_any();
                return make_union({args->front(), make_none()});
            }
            if (name == "Union") {
                if (!args || args->empty()) return make_any();
                return make_union(std::move(*args));
            }
            if (auto b = builtin_alias(name)) return container("", *b, std::move(args));
            if (abc_protocols().contains(name)) return protocol(name, std::move(args));
            return make_any();
        }
        if (module == "collections.abc" || module == "_collections_abc") {
            if (abc_protocols().contains(name)) return protocol(name, std::move(args));
        }
        if (module == "builtins") {
            if (name == "None") return make_none();
            return container("", name, std::move(args));
        }
        return container(module, name, std::move(args));
    }

    static TypeSpec container(std::string module, std::string name, std::optional<std::vector<TypeSpec>> args) {
        if (!args) return make_concrete(std::move(module), std::move(name));
        return make_generic(std::move(module), std::move(name), std::move(*args));
    }

    static TypeSpec protocol(std::string const& name, std::optional<std::vector<TypeSpec>> args) {
        if (name == "Callable") return make_protocol("collections.abc", name);
        return make_protocol("collections.abc", name, args ? std::move(*args) : std::vector<TypeSpec>{});
    }

    std::vector<py::Token> toks_;
    std::size_t pos_ = 0;
    NameResolver const& resolve_;
    int depth_;
};

} // namespace detail

/// Parses `text` as an annotation expression. Unparseable or unresolvable
/// pieces become Any rather than failing.
inline TypeSpec parse_annotation(std::string_view text, NameResolver const& resolve) {
    try {
        return detail::AnnotationParser(text, resolve, 0).parse();
    } catch (py::SyntaxError const&) {
        return make_any();
    }
}

} // namespace tracetype
