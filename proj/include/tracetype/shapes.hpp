#pragma once

// Array-shape generalization: dimension sizes that vary across traces become
// shared dimension variables (D1, D2, ...), constant ones stay literal.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tracetype/trace.hpp"

namespace tracetype {

struct ShapeObservation {
    std::string element_kind; // e.g. Float64
    std::vector<long long> dims;
};

/// Maps a numpy dtype name to its jaxtyping element-kind token, or nothing
/// when the dtype has no counterpart.
inline std::optional<std::string> element_kind_token(std::string_view dtype) {
    static const std::map<std::string, std::string, std::less<>> known = {
        {"bool", "Bool"},         {"float16", "Float16"},   {"float32", "Float32"},
        {"float64", "Float64"},   {"int8", "Int8"},         {"int16", "Int16"},
        {"int32", "Int32"},       {"int64", "Int64"},       {"uint8", "UInt8"},
        {"uint16", "UInt16"},     {"uint32", "UInt32"},     {"uint64", "UInt64"},
        {"complex64", "Complex64"}, {"complex128", "Complex128"},
    };
    auto it = known.find(dtype);
    if (it == known.end()) return std::nullopt;
    return it->second;
}

inline TypeSpec make_array_type(ShapeObservation const& obs) {
    std::vector<std::string> dims;
    for (auto d : obs.dims) dims.push_back(std::to_string(d));
    return make_shaped("jaxtyping", obs.element_kind, make_concrete("numpy", "ndarray"), std::move(dims));
}

struct ShapeGeneralization {
    std::vector<CallTrace> traces;
    std::vector<std::string> warnings;
};

namespace detail {

struct ShapeSlot {
    std::string position;
    std::size_t axis;
};

inline std::vector<TypeSpec*> position_entries(std::vector<CallTrace>& traces, std::string const& position) {
    std::vector<TypeSpec*> out;
    for (auto& t : traces) {
        if (position == "return") {
            out.push_back(&t.return_type);
        } else {
            TypeSpec* found = nullptr;
            for (std::size_t i = 0; i < t.arg_names.size(); ++i)
                if (t.arg_names[i] == position) found = &t.arg_types[i];
            out.push_back(found);
        }
    }
    return out;
}

} // namespace detail

/// Generalizes observed shapes position by position across `traces`. Slots
/// (position, axis) whose value sequences are identical share one variable.
/// A position whose arrays disagree in rank loses its shapes.
inline ShapeGeneralization generalize_shapes(std::vector<CallTrace> traces) {
    ShapeGeneralization out;
    std::vector<std::string> positions;
    for (auto const& t : traces)
        for (auto const& n : t.arg_names)
            if (std::find(positions.begin(), positions.end(), n) == positions.end()) positions.push_back(n);
    positions.push_back("return");

    std::vector<std::vector<std::string>> sequences; // per slot, the across-trace values
    std::vector<std::vector<TypeSpec*>> slot_entries;
    std::vector<std::size_t> slot_axis;

    for (auto const& pos : positions) {
        auto entries = detail::position_entries(traces, pos);
        TypeSpec const* head = nullptr;
        bool all_shaped = true;
        for (auto* e : entries) {
            if (!e) continue;
            if (!e->is(TypeKind::shape) || !e->shape) {
                all_shaped = false;
                continue;
            }
            if (!head) head = e;
        }
        if (!head) continue;
        if (!all_shaped) continue; // arrays mixed with other types: generalizer forms a union
        bool same_kind = true, same_rank = true;
        for (auto* e : entries) {
            if (!e) continue;
            same_kind &= e->module == head->module && e->name == head->name && e->args == head->args;
            same_rank &= e->shape->size() == head->shape->size();
        }
        if (!same_kind) continue;
        if (!same_rank) {
            out.warnings.push_back("position '" + pos + "': arrays of differing rank; shape dropped");
            for (auto* e : entries)
                if (e) *e = e->args.front();
            continue;
        }
        for (std::size_t axis = 0; axis < head->shape->size(); ++axis) {
            std::vector<std::string> seq;
            std::vector<TypeSpec*> holders;
            for (auto* e : entries) {
                if (!e) continue;
                seq.push_back((*e->shape)[axis]);
                holders.push_back(e);
            }
            // positions with absent slots get distinct sequences by length
            seq.push_back("#" + std::to_string(holders.size()));
            sequences.push_back(std::move(seq));
            slot_entries.push_back(std::move(holders));
            slot_axis.push_back(axis);
        }
    }

    std::map<std::vector<std::string>, std::string> variables;
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        auto const& seq = sequences[s];
        bool constant = std::all_of(seq.begin(), seq.end() - 1, [&](auto const& v) { return v == seq.front(); });
        std::string token;
        if (constant) {
            token = seq.front();
        } else {
            auto [it, inserted] = variables.try_emplace(seq, "");
            if (inserted) it->second = "D" + std::to_string(variables.size());
            token = it->second;
        }
        for (auto* e : slot_entries[s]) (*e->shape)[slot_axis[s]] = token;
    }
    out.traces = std::move(traces);
    return out;
}

} // namespace tracetype
