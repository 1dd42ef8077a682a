#pragma once

// Random model values for property tests. Everything is built through the
// public factories, so generated values are canonical.

#include <random>
#include <string>
#include <vector>

#include "tracetype/trace.hpp"

namespace gen {

using namespace tracetype;

inline int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {"a", "b", "x_1", "Ω", "\"q\"", "\\", "é", " ", "_", "Node", "ü\n"};
    std::string s;
    int n = uniform(rng, 1, 4);
    for (int i = 0; i < n; ++i) s += pieces[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(pieces.size()) - 1))];
    return s;
}

inline TypeSpec random_type(std::mt19937_64& rng, int depth) {
    int choice = uniform(rng, 0, depth > 0 ? 10 : 6);
    switch (choice) {
    case 0: return make_builtin(std::vector<std::string>{"int", "str", "float", "bytes"}[static_cast<std::size_t>(uniform(rng, 0, 3))]);
    case 1: return make_concrete(random_text(rng), random_text(rng));
    case 2: return make_typevar(uniform(rng, 1, 4));
    case 3: return make_self();
    case 4: return make_never();
    case 5: return make_any();
    case 6: return make_none();
    case 7: {
        std::vector<TypeSpec> args;
        for (int i = uniform(rng, 1, 3); i > 0; --i) args.push_back(random_type(rng, depth - 1));
        return make_generic("", uniform(rng, 0, 1) ? "dict" : "tuple", std::move(args));
    }
    case 8: {
        std::vector<TypeSpec> members;
        for (int i = uniform(rng, 2, 4); i > 0; --i) members.push_back(random_type(rng, depth - 1));
        return make_union(std::move(members));
    }
    case 9: return make_protocol("collections.abc", "Iterator", {random_type(rng, depth - 1)});
    default: {
        std::vector<std::string> dims;
        for (int i = uniform(rng, 0, 3); i > 0; --i) dims.push_back(uniform(rng, 0, 1) ? std::to_string(uniform(rng, 0, 64)) : "D" + std::to_string(uniform(rng, 1, 3)));
        return make_shaped("jaxtyping", "Float64", make_concrete("numpy", "ndarray"), std::move(dims));
    }
    }
}

inline CallTrace random_trace(std::mt19937_64& rng) {
    CallTrace t;
    for (int i = uniform(rng, 0, 3); i > 0; --i) {
        t.arg_names.push_back("p" + std::to_string(t.arg_names.size()) + random_text(rng));
        t.arg_types.push_back(random_type(rng, 2));
    }
    t.return_type = random_type(rng, 2);
    if (uniform(rng, 0, 3) == 0) t.yield_type = random_type(rng, 1);
    if (uniform(rng, 0, 5) == 0) t.send_type = random_type(rng, 1);
    return t;
}

inline FunctionKey random_key(std::mt19937_64& rng) {
    return {"/src/" + random_text(rng) + ".py", random_text(rng) + "." + random_text(rng), uniform(rng, 1, 5000)};
}

inline QualifiedClass random_class(std::mt19937_64& rng) { return {random_text(rng), random_text(rng)}; }

inline MethodContext random_method(std::mt19937_64& rng) {
    MethodContext m;
    m.defining_class = random_class(rng);
    m.receiver = static_cast<ReceiverKind>(uniform(rng, 0, 2));
    m.mro = {m.defining_class};
    for (int i = uniform(rng, 0, 2); i > 0; --i) m.mro.push_back(random_class(rng));
    if (uniform(rng, 0, 1)) {
        m.overridden_in = random_class(rng);
        if (uniform(rng, 0, 1)) {
            DeclaredSignature d;
            for (int i = uniform(rng, 0, 3); i > 0; --i) {
                DeclaredParam p{random_text(rng), std::nullopt, uniform(rng, 0, 1) == 1};
                if (uniform(rng, 0, 1)) p.type = random_type(rng, 1);
                d.params.push_back(p);
            }
            if (uniform(rng, 0, 1)) d.return_type = random_type(rng, 1);
            m.overridden = d;
        }
    }
    return m;
}

inline TraceStore random_store(std::mt19937_64& rng) {
    TraceStore s;
    for (int f = uniform(rng, 0, 4); f > 0; --f) {
        auto key = random_key(rng);
        for (int t = uniform(rng, 1, 4); t > 0; --t) {
            std::uint64_t count = uniform(rng, 0, 9) == 0 ? max_trace_count : static_cast<std::uint64_t>(uniform(rng, 1, 1000));
            s.record(key, random_trace(rng), count);
        }
        if (uniform(rng, 0, 2) == 0) s.methods[key] = random_method(rng);
    }
    for (int c = uniform(rng, 0, 3); c > 0; --c) {
        TypeInfo info;
        auto cls = random_class(rng);
        info.mro = {cls, {"builtins", "object"}};
        for (int a = uniform(rng, 0, 4); a > 0; --a) info.attributes.push_back(random_text(rng));
        s.types[cls] = info;
    }
    s.seed = std::uniform_int_distribution<std::uint64_t>()(rng);
    return s;
}

} // namespace gen
