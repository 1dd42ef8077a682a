#pragma once

// Line-delimited trace interchange format.
//
// Line 1 is a header object; every following line is one record:
//   {"fn": {...}, "args": [...], "ret": ..., "yield": ..., "send": ..., "count": N}
// plus two metadata record kinds written by the agent:
//   {"type": {"class": [module, name], "mro": [...], "attrs": [...]}}
//   {"method": {"fn": {...}, "class": [...], "receiver": ..., "mro": [...],
//               "overridden_in": [...]|null, "overridden": {...}|null}}

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tracetype/trace.hpp"

namespace tracetype {

using ordered_json = nlohmann::ordered_json;

inline constexpr std::string_view trace_format_name = "tracetype-traces";
inline constexpr int trace_format_version = 1;

class FormatError : public std::runtime_error {
public:
    FormatError(std::size_t line, std::size_t record, std::string const& what)
        : std::runtime_error("line " + std::to_string(line) + " (record " + std::to_string(record) + "): " + what),
          line_(line), record_(record) {}

    std::size_t line() const { return line_; }
    std::size_t record() const { return record_; }

private:
    std::size_t line_;
    std::size_t record_;
};

// ------------------------------------------------------------------ encode

inline ordered_json to_json(TypeSpec const& t) {
    ordered_json j;
    j["kind"] = std::string(to_string(t.kind));
    j["module"] = t.module;
    j["name"] = t.name;
    auto args = ordered_json::array();
    for (auto const& a : t.args) args.push_back(to_json(a));
    j["args"] = std::move(args);
    j["typevar"] = t.kind == TypeKind::typevar ? ordered_json(t.typevar_id) : ordered_json(nullptr);
    j["shape"] = t.shape ? ordered_json(*t.shape) : ordered_json(nullptr);
    return j;
}

inline ordered_json to_json(FunctionKey const& fn) {
    ordered_json j;
    j["path"] = fn.source_path;
    j["qualname"] = fn.qualified_name;
    j["line"] = fn.first_line;
    return j;
}

inline ordered_json to_json(QualifiedClass const& c) { return ordered_json::array({c.module, c.name}); }

inline ordered_json optional_json(std::optional<TypeSpec> const& t) {
    return t ? to_json(*t) : ordered_json(nullptr);
}

/// One trace record. `share` is appended for anomaly reports.
inline ordered_json trace_record(FunctionKey const& fn, CallTrace const& trace, std::uint64_t count,
                                 std::optional<double> share = std::nullopt) {
    ordered_json j;
    j["fn"] = to_json(fn);
    auto args = ordered_json::array();
    for (std::size_t i = 0; i < trace.arg_names.size(); ++i)
        args.push_back(ordered_json::array({trace.arg_names[i], to_json(trace.arg_types[i])}));
    j["args"] = std::move(args);
    j["ret"] = to_json(trace.return_type);
    j["yield"] = optional_json(trace.yield_type);
    j["send"] = optional_json(trace.send_type);
    j["count"] = count;
    if (share) j["share"] = *share;
    return j;
}

inline std::string_view to_string(ReceiverKind r) {
    switch (r) {
    case ReceiverKind::none: return "none";
    case ReceiverKind::instance: return "instance";
    case ReceiverKind::class_: return "class";
    }
    return "none";
}

inline ordered_json to_json(DeclaredSignature const& sig) {
    ordered_json j;
    auto params = ordered_json::array();
    for (auto const& p : sig.params)
        params.push_back(ordered_json::array({p.name, optional_json(p.type), p.has_default}));
    j["params"] = std::move(params);
    j["ret"] = optional_json(sig.return_type);
    return j;
}

inline void serialize_store(TraceStore const& s, std::ostream& out) {
    ordered_json header;
    header["format"] = trace_format_name;
    header["version"] = trace_format_version;
    header["seed"] = s.seed;
    out << header.dump() << '\n';

    for (auto const& [cls, info] : s.types) {
        ordered_json body;
        body["class"] = to_json(cls);
        auto mro = ordered_json::array();
        for (auto const& c : info.mro) mro.push_back(to_json(c));
        body["mro"] = std::move(mro);
        body["attrs"] = info.attributes;
        ordered_json rec;
        rec["type"] = std::move(body);
        out << rec.dump() << '\n';
    }
    for (auto const& [fn, ctx] : s.methods) {
        ordered_json body;
        body["fn"] = to_json(fn);
        body["class"] = to_json(ctx.defining_class);
        body["receiver"] = to_string(ctx.receiver);
        auto mro = ordered_json::array();
        for (auto const& c : ctx.mro) mro.push_back(to_json(c));
        body["mro"] = std::move(mro);
        body["overridden_in"] = ctx.overridden_in ? to_json(*ctx.overridden_in) : ordered_json(nullptr);
        body["overridden"] = ctx.overridden ? to_json(*ctx.overridden) : ordered_json(nullptr);
        ordered_json rec;
        rec["method"] = std::move(body);
        out << rec.dump() << '\n';
    }
    for (auto const& [fn, traces] : s.entries)
        for (auto const& [trace, count] : traces) out << trace_record(fn, trace, count).dump() << '\n';
}

inline std::string serialize_store(TraceStore const& s) {
    std::ostringstream out;
    serialize_store(s, out);
    return out.str();
}

// ------------------------------------------------------------------ decode

namespace detail {

struct Decoder {
    std::size_t line;
    std::size_t record;

    [[noreturn]] void fail(std::string const& what) const { throw FormatError(line, record, what); }

    ordered_json const& field(ordered_json const& j, char const* key) const {
        if (!j.is_object()) fail(std::string("expected object containing \"") + key + "\"");
        auto it = j.find(key);
        if (it == j.end()) fail(std::string("missing field \"") + key + "\"");
        return *it;
    }

    std::string str(ordered_json const& j, char const* what) const {
        if (!j.is_string()) fail(std::string(what) + " must be a string");
        return j.get<std::string>();
    }

    TypeSpec type(ordered_json const& j, int depth = 0) const {
        if (depth > 64) fail("type nesting too deep");
        TypeSpec t;
        auto kind = kind_from_string(str(field(j, "kind"), "kind"));
        if (!kind) fail("unknown type kind");
        t.kind = *kind;
        t.module = str(field(j, "module"), "module");
        t.name = str(field(j, "name"), "name");
        auto const& args = field(j, "args");
        if (!args.is_array()) fail("type args must be an array");
        for (auto const& a : args) t.args.push_back(type(a, depth + 1));
        auto const& tv = field(j, "typevar");
        if (!tv.is_null()) {
            if (!tv.is_number_integer()) fail("typevar must be an integer or null");
            t.typevar_id = tv.get<int>();
        }
        auto const& shape = field(j, "shape");
        if (!shape.is_null()) {
            if (!shape.is_array()) fail("shape must be an array or null");
            std::vector<std::string> dims;
            for (auto const& d : shape) dims.push_back(str(d, "shape dimension"));
            t.shape = std::move(dims);
        }
        switch (t.kind) {
        case TypeKind::union_:
            if (t.args.size() < 2) fail("union needs at least two members");
            for (auto const& m : t.args)
                if (m.is(TypeKind::union_)) fail("nested union");
            {
                auto canon = make_union(t.args);
                if (!canon.is(TypeKind::union_) || canon.args.size() != t.args.size())
                    fail("union has duplicate members");
                t = std::move(canon);
            }
            break;
        case TypeKind::never:
            if (!t.args.empty()) fail("Never takes no arguments");
            break;
        case TypeKind::typevar:
            if (!t.module.empty() || !t.name.empty() || t.typevar_id < 1) fail("malformed typevar");
            break;
        case TypeKind::shape:
            if (!t.shape) fail("shape-annotated type without shape");
            break;
        default: break;
        }
        return t;
    }

    std::optional<TypeSpec> optional_type(ordered_json const& j) const {
        if (j.is_null()) return std::nullopt;
        return type(j);
    }

    FunctionKey function(ordered_json const& j) const {
        FunctionKey fn;
        fn.source_path = str(field(j, "path"), "path");
        fn.qualified_name = str(field(j, "qualname"), "qualname");
        auto const& line_no = field(j, "line");
        if (!line_no.is_number_integer() || line_no.get<long long>() < 1) fail("line must be a positive integer");
        fn.first_line = line_no.get<int>();
        return fn;
    }

    QualifiedClass cls(ordered_json const& j) const {
        if (!j.is_array() || j.size() != 2) fail("class must be [module, name]");
        return {str(j[0], "class module"), str(j[1], "class name")};
    }

    std::vector<QualifiedClass> classes(ordered_json const& j) const {
        if (!j.is_array()) fail("expected an array of classes");
        std::vector<QualifiedClass> out;
        for (auto const& c : j) out.push_back(cls(c));
        return out;
    }
};

} // namespace detail

/// Parses a trace stream. Throws FormatError naming the line and record
/// index (0-based, counted after the header) of the first malformed record.
inline TraceStore deserialize_store(std::istream& in) {
    TraceStore store;
    std::string text;
    std::size_t line_no = 0;
    std::size_t record = 0;
    bool seen_header = false;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.empty()) continue;
        detail::Decoder dec{line_no, record};
        ordered_json j;
        try {
            j = ordered_json::parse(text);
        } catch (nlohmann::json::parse_error const& e) {
            dec.fail(std::string("malformed record: ") + e.what());
        }
        if (!seen_header) {
            if (!j.is_object() || j.value("format", std::string()) != trace_format_name)
                dec.fail("missing trace header");
            if (j.value("version", 0) != trace_format_version) dec.fail("unsupported trace format version");
            auto const& seed = dec.field(j, "seed");
            if (!seed.is_number_unsigned() && !seed.is_number_integer()) dec.fail("seed must be an integer");
            store.seed = seed.get<std::uint64_t>();
            seen_header = true;
            continue;
        }
        if (!j.is_object()) dec.fail("record must be an object");
        if (j.contains("type")) {
            auto const& body = j["type"];
            TypeInfo info;
            info.mro = dec.classes(dec.field(body, "mro"));
            auto const& attrs = dec.field(body, "attrs");
            if (!attrs.is_array()) dec.fail("attrs must be an array");
            for (auto const& a : attrs) info.attributes.push_back(dec.str(a, "attribute"));
            store.types[dec.cls(dec.field(body, "class"))] = std::move(info);
        } else if (j.contains("method")) {
            auto const& body = j["method"];
            MethodContext ctx;
            auto fn = dec.function(dec.field(body, "fn"));
            ctx.defining_class = dec.cls(dec.field(body, "class"));
            auto receiver = dec.str(dec.field(body, "receiver"), "receiver");
            if (receiver == "instance") ctx.receiver = ReceiverKind::instance;
            else if (receiver == "class") ctx.receiver = ReceiverKind::class_;
            else if (receiver == "none") ctx.receiver = ReceiverKind::none;
            else dec.fail("unknown receiver kind");
            ctx.mro = dec.classes(dec.field(body, "mro"));
            auto const& in_cls = dec.field(body, "overridden_in");
            if (!in_cls.is_null()) ctx.overridden_in = dec.cls(in_cls);
            auto const& ov = dec.field(body, "overridden");
            if (!ov.is_null()) {
                DeclaredSignature sig;
                auto const& params = dec.field(ov, "params");
                if (!params.is_array()) dec.fail("params must be an array");
                for (auto const& p : params) {
                    if (!p.is_array() || p.size() != 3 || !p[2].is_boolean()) dec.fail("malformed declared param");
                    sig.params.push_back({dec.str(p[0], "param name"), dec.optional_type(p[1]), p[2].get<bool>()});
                }
                sig.return_type = dec.optional_type(dec.field(ov, "ret"));
                ctx.overridden = std::move(sig);
            }
            store.methods[fn] = std::move(ctx);
        } else {
            auto fn = dec.function(dec.field(j, "fn"));
            CallTrace trace;
            auto const& args = dec.field(j, "args");
            if (!args.is_array()) dec.fail("args must be an array");
            for (auto const& a : args) {
                if (!a.is_array() || a.size() != 2) dec.fail("arg entries must be [name, type]");
                trace.arg_names.push_back(dec.str(a[0], "arg name"));
                trace.arg_types.push_back(dec.type(a[1]));
            }
            trace.return_type = dec.type(dec.field(j, "ret"));
            trace.yield_type = dec.optional_type(dec.field(j, "yield"));
            trace.send_type = dec.optional_type(dec.field(j, "send"));
            auto const& count = dec.field(j, "count");
            if (!count.is_number_unsigned() || count.get<std::uint64_t>() == 0)
                dec.fail("count must be a positive integer");
            store.record(fn, trace, count.get<std::uint64_t>());
        }
        ++record;
    }
    if (!seen_header) throw FormatError(line_no, 0, "empty stream: missing trace header");
    return store;
}

inline TraceStore deserialize_store(std::string const& text) {
    std::istringstream in(text);
    return deserialize_store(in);
}

} // namespace tracetype
