#pragma once

// Trace store -> signatures -> source edits, plus the anomaly report.

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tracetype/diff.hpp"
#include "tracetype/generalizer.hpp"
#include "tracetype/method_typer.hpp"
#include "tracetype/shapes.hpp"
#include "tracetype/stubs.hpp"
#include "tracetype/trace_io.hpp"
#include "tracetype/writer.hpp"

namespace tracetype {

struct AnnotateOptions {
    double coverage = 0.8;
    TargetVersion version{3, 12};
    bool infer_shapes = false;
    bool overwrite = false;
    std::filesystem::path root; // module names are relative to this; empty: current directory
    std::vector<std::filesystem::path> stub_roots; // empty: StubRepository::default_roots()
};

struct FileOutcome {
    std::filesystem::path path;
    std::string before;
    EditResult edit;
};

struct AnnotateResult {
    std::map<FunctionKey, Signature> signatures;
    std::vector<FileOutcome> files;
    std::string anomaly_report;
    std::vector<std::string> diagnostics;
};

inline TypeSpec strip_shapes(TypeSpec const& t) {
    return transform_type(t, [](TypeSpec x) { return x.is(TypeKind::shape) && !x.args.empty() ? x.args.front() : x; });
}

inline CallTrace strip_shapes(CallTrace t) {
    for (auto& a : t.arg_types) a = strip_shapes(a);
    t.return_type = strip_shapes(t.return_type);
    if (t.yield_type) t.yield_type = strip_shapes(*t.yield_type);
    if (t.send_type) t.send_type = strip_shapes(*t.send_type);
    return t;
}

/// Dotted module name of `file` relative to `root` (package __init__ maps to
/// the package); the bare stem when the file lies outside the root.
inline std::string module_name_for(std::filesystem::path const& file, std::filesystem::path const& root) {
    std::error_code ec;
    auto base = root.empty() ? std::filesystem::current_path(ec) : std::filesystem::absolute(root, ec);
    auto rel = std::filesystem::absolute(file, ec).lexically_normal().lexically_relative(base.lexically_normal());
    if (rel.empty() || *rel.begin() == "..") return file.stem().string();
    std::string out;
    for (auto it = rel.begin(); it != rel.end(); ++it) {
        auto part = std::next(it) == rel.end() ? it->stem().string() : it->string();
        if (std::next(it) == rel.end() && part == "__init__" && !out.empty()) break;
        if (!out.empty()) out += '.';
        out += part;
    }
    return out;
}

/// Filters and generalizes every function in the store, then runs the
/// method passes. Filtered-out traces go to the anomaly report.
inline AnnotateResult infer_signatures(TraceStore const& store, AnnotateOptions const& opts, StubRepository* stubs) {
    AnnotateResult result;
    TypeHierarchy hierarchy(store.types);
    std::ostringstream anomalies;
    for (auto const& [fn, traces] : store.entries) {
        if (traces.empty()) continue;
        auto filtered = filter_traces(traces, opts.coverage);
        for (auto const& a : filtered.anomalies) {
            double share = filtered.total ? static_cast<double>(a.count) / static_cast<double>(filtered.total) : 0.0;
            anomalies << trace_record(fn, a.trace, a.count, share).dump() << '\n';
        }

        std::vector<CallTrace> kept;
        std::vector<std::uint64_t> counts;
        for (auto const& w : filtered.retained) {
            kept.push_back(w.trace);
            counts.push_back(w.count);
        }
        if (opts.infer_shapes) {
            auto shaped = generalize_shapes(std::move(kept));
            kept = std::move(shaped.traces);
            for (auto& w : shaped.warnings) result.diagnostics.push_back(fn.qualified_name + ": " + w);
        } else {
            for (auto& t : kept) t = strip_shapes(std::move(t));
        }

        auto method = store.methods.find(fn);
        ReceiverKind receiver = method == store.methods.end() ? ReceiverKind::none : method->second.receiver;
        // binding Self can make distinct traces equal; merge them in order
        std::vector<WeightedTrace> weighted;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            auto t = bind_receiver(kept[i], receiver);
            auto same = std::find_if(weighted.begin(), weighted.end(), [&](auto const& w) { return w.trace == t; });
            if (same != weighted.end()) same->count = saturating_add(same->count, counts[i]);
            else weighted.push_back({std::move(t), counts[i]});
        }

        auto sig = generalize(fn, weighted, hierarchy);
        if (method != store.methods.end()) {
            auto const& ctx = method->second;
            sig = apply_self(std::move(sig), ctx);
            auto name = fn.qualified_name.substr(fn.qualified_name.rfind('.') + 1);
            if (ctx.overridden_in && !exempt_from_override(fn.qualified_name)) {
                if (auto parent = parent_declaration(ctx, name, stubs))
                    sig = widen_override(std::move(sig), ctx, *parent, hierarchy);
                else
                    result.diagnostics.push_back(fn.qualified_name + ": no declaration found for overridden " +
                                                 ctx.overridden_in->module + "." + ctx.overridden_in->name + "." + name);
            }
        }
        result.signatures.emplace(fn, std::move(sig));
    }
    result.anomaly_report = anomalies.str();
    return result;
}

/// Full analysis: signatures plus in-memory edits for every traced file.
/// Nothing is written.
inline AnnotateResult annotate(TraceStore const& store, AnnotateOptions const& opts) {
    StubRepository stubs(opts.stub_roots.empty() ? StubRepository::default_roots() : opts.stub_roots,
                         StubEnvironment{opts.version});
    auto result = infer_signatures(store, opts, &stubs);
    for (auto& w : stubs.warnings()) result.diagnostics.push_back(w);

    std::map<std::string, std::vector<Signature>> by_file;
    for (auto const& [fn, sig] : result.signatures) by_file[fn.source_path].push_back(sig);
    for (auto const& [path, sigs] : by_file) {
        FileOutcome f;
        f.path = path;
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            result.diagnostics.push_back("skipping " + path + ": cannot read");
            continue;
        }
        std::stringstream ss;
        ss << in.rdbuf();
        f.before = ss.str();
        WriterOptions wopts{opts.version, opts.overwrite, module_name_for(path, opts.root)};
        try {
            f.edit = apply_edits(f.before, sigs, wopts, f.path.stem().string());
        } catch (std::exception const& e) {
            result.diagnostics.push_back("skipping " + path + ": " + e.what());
            continue;
        }
        for (auto const& d : f.edit.diagnostics) result.diagnostics.push_back(path + ": " + d);
        result.files.push_back(std::move(f));
    }
    return result;
}

/// Unified diff over all changed files.
inline std::string render_diff(AnnotateResult const& r) {
    std::string out;
    for (auto const& f : r.files) {
        if (f.edit.skipped || !f.edit.changed()) continue;
        out += unified_diff(f.before, f.edit.text, f.path.string(), f.path.string());
    }
    return out;
}

/// Writes changed files in place; returns how many were written.
inline std::size_t commit_edits(AnnotateResult const& r, bool keep_backup) {
    std::size_t n = 0;
    for (auto const& f : r.files) {
        if (f.edit.skipped || !f.edit.changed()) continue;
        write_atomically(f.path, f.edit.text, keep_backup);
        ++n;
    }
    return n;
}

} // namespace tracetype
