#pragma once

// Stub repository lookup: finds the declared signature of a method in a
// tree of .pyi files, evaluating version/platform guards and unioning
// overloads slot by slot.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "tracetype/annotation_parser.hpp"
#include "tracetype/py_source.hpp"
#include "tracetype/render.hpp"
#include "tracetype/trace.hpp"

namespace tracetype {

struct StubEnvironment {
    TargetVersion version;
    std::string platform = "linux";
};

namespace detail {

/// Evaluates the guard expressions stubs use: comparisons on
/// sys.version_info and sys.platform combined with not/and/or. Anything
/// else is unknown, which counts as true.
class GuardEvaluator {
public:
    using Value = std::variant<std::monostate, bool, long long, std::string, std::vector<long long>>;

    GuardEvaluator(std::string_view text, StubEnvironment const& env) : env_(env) {
        try {
            toks_ = py::tokenize(text);
        } catch (py::SyntaxError const&) {
            toks_.clear();
        }
    }

    /// true, false, or nothing when undecidable
    std::optional<bool> evaluate() {
        if (toks_.empty()) return std::nullopt;
        auto v = or_expr();
        if (auto const* b = std::get_if<bool>(&v)) return *b;
        return std::nullopt;
    }

private:
    py::Token const& peek() const {
        static const py::Token end{py::Tok::end, 0, 0, 0, 0, {}};
        return pos_ < toks_.size() ? toks_[pos_] : end;
    }
    bool accept_op(std::string_view s) {
        if (peek().is_op(s)) return ++pos_, true;
        return false;
    }
    bool accept_name(std::string_view s) {
        if (peek().is_name(s)) return ++pos_, true;
        return false;
    }

    static std::optional<bool> truth(Value const& v) {
        if (auto const* b = std::get_if<bool>(&v)) return *b;
        return std::nullopt;
    }

    Value or_expr() {
        auto v = and_expr();
        while (accept_name("or")) {
            auto r = and_expr();
            auto a = truth(v), b = truth(r);
            if ((a && *a) || (b && *b)) v = true;
            else if (a && b) v = false;
            else v = std::monostate{};
        }
        return v;
    }
    Value and_expr() {
        auto v = not_expr();
        while (accept_name("and")) {
            auto r = not_expr();
            auto a = truth(v), b = truth(r);
            if ((a && !*a) || (b && !*b)) v = false;
            else if (a && b) v = true;
            else v = std::monostate{};
        }
        return v;
    }
    Value not_expr() {
        if (accept_name("not")) {
            auto v = not_expr();
            if (auto b = truth(v)) return !*b;
            return std::monostate{};
        }
        return comparison();
    }

    static int compare_versions(std::vector<long long> const& a, std::vector<long long> const& b) {
        for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
            if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
        if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
        return 0;
    }

    Value comparison() {
        auto lhs = atom();
        static constexpr std::string_view ops[] = {"==", "!=", ">=", "<=", ">", "<"};
        for (auto op : ops) {
            if (!accept_op(op)) continue;
            auto rhs = atom();
            int c;
            if (auto const *a = std::get_if<std::vector<long long>>(&lhs), *b = std::get_if<std::vector<long long>>(&rhs);
                a && b) {
                c = compare_versions(*a, *b);
            } else if (auto const *x = std::get_if<long long>(&lhs), *y = std::get_if<long long>(&rhs); x && y) {
                c = *x < *y ? -1 : (*x > *y ? 1 : 0);
            } else if (auto const *s = std::get_if<std::string>(&lhs), *u = std::get_if<std::string>(&rhs); s && u) {
                c = s->compare(*u);
                c = c < 0 ? -1 : (c > 0 ? 1 : 0);
            } else {
                return std::monostate{};
            }
            if (op == "==") return c == 0;
            if (op == "!=") return c != 0;
            if (op == ">=") return c >= 0;
            if (op == "<=") return c <= 0;
            if (op == ">") return c > 0;
            return c < 0;
        }
        // str.startswith on sys.platform
        return lhs;
    }

    Value atom() {
        auto const& t = peek();
        if (t.is_op("(")) {
            ++pos_;
            std::vector<long long> tuple;
            bool is_tuple = false;
            Value inner;
            if (peek().kind == py::Tok::number) {
                while (peek().kind == py::Tok::number) {
                    tuple.push_back(std::stoll(std::string(peek().text)));
                    ++pos_;
                    if (!accept_op(",")) break;
                    is_tuple = true;
                }
                if (!is_tuple && tuple.size() == 1) inner = tuple.front();
                else inner = tuple;
            } else {
                inner = or_expr();
            }
            accept_op(")");
            return inner;
        }
        if (t.kind == py::Tok::number) {
            ++pos_;
            try {
                return std::stoll(std::string(t.text));
            } catch (...) {
                return std::monostate{};
            }
        }
        if (t.kind == py::Tok::string) {
            ++pos_;
            auto s = t.text;
            auto q = s.find_first_of("'\"");
            return std::string(s.substr(q + 1, s.size() - q - 2));
        }
        if (t.is_name("True")) return ++pos_, true;
        if (t.is_name("False")) return ++pos_, false;
        if (t.is_name("sys") && pos_ + 2 < toks_.size() && toks_[pos_ + 1].is_op(".")) {
            auto attr = toks_[pos_ + 2].text;
            pos_ += 3;
            if (attr == "version_info") {
                std::vector<long long> v{env_.version.major, env_.version.minor, 0};
                if (accept_op("[")) {
                    Value out = std::monostate{};
                    if (accept_op(":")) {
                        if (peek().kind == py::Tok::number) {
                            auto n = std::stoll(std::string(peek().text));
                            ++pos_;
                            v.resize(static_cast<std::size_t>(std::min<long long>(n, 3)));
                            out = v;
                        }
                    } else if (peek().kind == py::Tok::number) {
                        auto n = std::stoll(std::string(peek().text));
                        ++pos_;
                        if (n >= 0 && n < 3) out = v[static_cast<std::size_t>(n)];
                    }
                    accept_op("]");
                    return out;
                }
                return v;
            }
            if (attr == "platform") {
                // sys.platform.startswith("linux")
                if (accept_op(".") && accept_name("startswith") && accept_op("(")) {
                    Value arg = atom();
                    accept_op(")");
                    if (auto const* s = std::get_if<std::string>(&arg)) return env_.platform.starts_with(*s);
                    return std::monostate{};
                }
                return env_.platform;
            }
            return std::monostate{};
        }
        // unknown atom: skip one token
        ++pos_;
        return std::monostate{};
    }

    std::vector<py::Token> toks_;
    std::size_t pos_ = 0;
    StubEnvironment env_;
};

inline bool guard_holds(std::string const& text, StubEnvironment const& env) {
    return GuardEvaluator(text, env).evaluate().value_or(true);
}

inline bool conditions_hold(std::vector<py::Condition> const& conds, StubEnvironment const& env) {
    for (auto const& c : conds) {
        for (auto const& p : c.prior)
            if (GuardEvaluator(p, env).evaluate() == std::optional<bool>(true)) return false;
        if (c.test && !guard_holds(*c.test, env)) return false;
    }
    return true;
}

} // namespace detail

/// Builds a resolver for names used inside one module (source or stub),
/// following its import statements and local definitions.
inline NameResolver module_resolver(std::string module, py::ModuleIndex const& idx) {
    struct Bindings {
        std::map<std::string, QualifiedClass> from_imports; // bound name -> (module, name)
        std::map<std::string, std::string> module_imports;  // bound name -> module path
        std::set<std::string> local_classes;
        std::set<std::string> opaque; // typevars, aliases: resolve to Any
    };
    auto b = std::make_shared<Bindings>();
    auto absolute = [&](std::string const& rel) {
        if (rel.empty() || rel[0] != '.') return rel;
        std::size_t dots = rel.find_first_not_of('.');
        if (dots == std::string::npos) dots = rel.size();
        std::string base = module;
        for (std::size_t i = 0; i < dots; ++i) {
            auto p = base.rfind('.');
            base = p == std::string::npos ? std::string() : base.substr(0, p);
        }
        auto rest = rel.substr(dots);
        return base.empty() ? rest : (rest.empty() ? base : base + "." + rest);
    };
    for (auto const& imp : idx.imports) {
        for (auto const& n : imp.names) {
            if (imp.is_from) {
                if (n.name == "*") continue;
                b->from_imports[n.as_name.empty() ? n.name : n.as_name] = {absolute(imp.module), n.name};
            } else if (!n.as_name.empty()) {
                b->module_imports[n.as_name] = n.name;
            } else {
                auto top = n.name.substr(0, n.name.find('.'));
                b->module_imports[top] = top;
            }
        }
    }
    for (auto const& c : idx.classes)
        if (c.top_level) b->local_classes.insert(c.name);
    for (auto const& a : idx.assignments) {
        if (b->local_classes.contains(a.target)) continue;
        b->opaque.insert(a.target);
    }
    return [b, module](std::string const& dotted) -> std::optional<QualifiedClass> {
        auto dot = dotted.find('.');
        std::string head = dotted.substr(0, dot);
        std::string rest = dot == std::string::npos ? std::string() : dotted.substr(dot + 1);
        if (auto it = b->from_imports.find(head); it != b->from_imports.end()) {
            if (rest.empty()) return it->second;
            // `from pkg import mod` then mod.Name
            return QualifiedClass{it->second.module + "." + it->second.name, rest};
        }
        if (auto it = b->module_imports.find(head); it != b->module_imports.end()) {
            if (rest.empty()) return std::nullopt;
            auto full = it->second + "." + rest;
            auto p = full.rfind('.');
            return QualifiedClass{full.substr(0, p), full.substr(p + 1)};
        }
        if (b->local_classes.contains(head)) return QualifiedClass{module, dotted};
        if (b->opaque.contains(head)) return std::nullopt;
        if (rest.empty()) return QualifiedClass{"builtins", head};
        return std::nullopt;
    };
}

/// Declared signature of `fn` with names resolved through `resolve`.
inline DeclaredSignature declared_signature(py::FunctionDef const& fn, NameResolver const& resolve) {
    DeclaredSignature sig;
    for (auto const& p : fn.params) {
        if (p.kind == py::ParamKind::kw_marker || p.kind == py::ParamKind::pos_marker) continue;
        DeclaredParam dp;
        dp.name = p.name;
        dp.has_default = p.default_value.has_value();
        if (p.annotation) dp.type = parse_annotation(p.annotation_text, resolve);
        sig.params.push_back(std::move(dp));
    }
    if (fn.return_annotation) sig.return_type = parse_annotation(fn.return_annotation_text, resolve);
    return sig;
}

/// Unions declared types slot by slot (by parameter name). A slot that some
/// declaration leaves unannotated stays unannotated.
inline DeclaredSignature union_signatures(std::vector<DeclaredSignature> const& sigs) {
    if (sigs.empty()) return {};
    DeclaredSignature out = sigs.front();
    for (std::size_t i = 1; i < sigs.size(); ++i) {
        for (auto const& p : sigs[i].params) {
            auto it = std::find_if(out.params.begin(), out.params.end(), [&](auto const& q) { return q.name == p.name; });
            if (it == out.params.end()) {
                out.params.push_back(p);
                continue;
            }
            if (it->type && p.type) it->type = make_union({*it->type, *p.type});
            else it->type.reset();
            it->has_default = it->has_default || p.has_default;
        }
        if (out.return_type && sigs[i].return_type)
            out.return_type = make_union({*out.return_type, *sigs[i].return_type});
        else
            out.return_type.reset();
    }
    return out;
}

/// A directory of .pyi files laid out by module path (the layout of the
/// standard stub collection's stdlib directory or any package stub tree).
class StubRepository {
public:
    explicit StubRepository(std::vector<std::filesystem::path> roots, StubEnvironment env = {})
        : roots_(std::move(roots)), env_(std::move(env)) {}

    /// Default search path: an explicit directory from TRACETYPE_STUBS, then
    /// stub collections bundled with locally installed type checkers.
    static std::vector<std::filesystem::path> default_roots() {
        std::vector<std::filesystem::path> out;
        if (auto const* env = std::getenv("TRACETYPE_STUBS"); env && *env) out.emplace_back(env);
        for (auto const* p : {"/usr/lib/node_modules/pyright/dist/typeshed-fallback/stdlib",
                              "/usr/local/lib/node_modules/pyright/dist/typeshed-fallback/stdlib",
                              "/usr/local/lib/python3.10/dist-packages/mypy/typeshed/stdlib",
                              "/usr/lib/python3/dist-packages/mypy/typeshed/stdlib"}) {
            std::error_code ec;
            if (std::filesystem::is_directory(p, ec)) out.emplace_back(p);
        }
        return out;
    }

    std::vector<std::string> const& warnings() const { return warnings_; }

    /// Declared parameter/return types of `qualname` (e.g. `Mapping.get`) in
    /// `module`, following re-exports. Overloads are unioned per slot.
    std::optional<DeclaredSignature> lookup(std::string const& module, std::string const& qualname) {
        std::lock_guard lock(mutex_);
        return lookup_impl(module, qualname, 0);
    }

private:
    struct Loaded {
        std::string module;
        py::ModuleIndex index;
    };

    std::optional<std::filesystem::path> locate(std::string const& module) const {
        std::string rel = module;
        std::replace(rel.begin(), rel.end(), '.', '/');
        for (auto const& r : roots_) {
            std::error_code ec;
            auto file = r / (rel + ".pyi");
            if (std::filesystem::is_regular_file(file, ec)) return file;
            auto pkg = r / rel / "__init__.pyi";
            if (std::filesystem::is_regular_file(pkg, ec)) return pkg;
        }
        return std::nullopt;
    }

    Loaded const* load(std::string const& module) {
        if (auto it = cache_.find(module); it != cache_.end()) return it->second.get();
        auto& slot = cache_[module];
        auto path = locate(module);
        if (!path) return nullptr;
        std::ifstream in(*path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            slot = std::make_unique<Loaded>(Loaded{module, py::scan_module(ss.str())});
        } catch (py::SyntaxError const& e) {
            warnings_.push_back("skipping malformed stub " + path->string() + ": " + e.what());
        }
        return slot.get();
    }

    std::optional<DeclaredSignature> lookup_impl(std::string const& module, std::string const& qualname, int depth) {
        if (depth > 6) return std::nullopt;
        auto const* stub = load(module);
        if (!stub) return std::nullopt;
        auto resolve = module_resolver(module, stub->index);
        std::vector<DeclaredSignature> found;
        for (auto const& fn : stub->index.functions) {
            if (fn.qualname != qualname) continue;
            if (!detail::conditions_hold(fn.conditions, env_)) continue;
            found.push_back(declared_signature(fn, resolve));
        }
        if (!found.empty()) return union_signatures(found);

        // the class may be re-exported from another module
        auto head = qualname.substr(0, qualname.find('.'));
        auto rest = qualname.substr(head.size());
        bool defined_here = std::any_of(stub->index.classes.begin(), stub->index.classes.end(),
                                        [&](auto const& c) { return c.top_level && c.name == head; });
        if (defined_here) return std::nullopt;
        for (auto const& imp : stub->index.imports) {
            if (!imp.is_from) continue;
            for (auto const& n : imp.names) {
                std::string target;
                if (n.name == "*") target = head;
                else if ((n.as_name.empty() ? n.name : n.as_name) == head) target = n.name;
                else continue;
                auto origin = imp.module;
                if (!origin.empty() && origin[0] == '.') continue;
                if (auto sig = lookup_impl(origin, target + rest, depth + 1)) return sig;
            }
        }
        return std::nullopt;
    }

    std::vector<std::filesystem::path> roots_;
    StubEnvironment env_;
    std::map<std::string, std::unique_ptr<Loaded>> cache_;
    std::vector<std::string> warnings_;
    std::mutex mutex_;
};

} // namespace tracetype
