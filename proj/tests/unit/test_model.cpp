#include <gtest/gtest.h>

#include <unordered_set>

#include "support/generators.hpp"
#include "tracetype/trace_io.hpp"

using namespace tracetype;

namespace {

FunctionKey add_key() { return {"/w/add.py", "add", 1}; }

CallTrace int_add() {
    CallTrace t;
    t.arg_names = {"a", "b"};
    t.arg_types = {make_builtin("int"), make_builtin("int")};
    t.return_type = make_builtin("int");
    return t;
}

} // namespace

TEST(TypeSpec, UnionIsFlattenedSortedAndDeduplicated) {
    auto u = make_union({make_builtin("str"), make_union({make_builtin("int"), make_builtin("str")}), make_none()});
    ASSERT_TRUE(u.is(TypeKind::union_));
    ASSERT_EQ(u.args.size(), 3u);
    for (auto const& m : u.args) EXPECT_FALSE(m.is(TypeKind::union_));
    EXPECT_EQ(repr(u), "None|int|str");
}

TEST(TypeSpec, UnionCollapses) {
    EXPECT_EQ(make_union({make_builtin("int"), make_builtin("int")}), make_builtin("int"));
    EXPECT_TRUE(make_union({}).is(TypeKind::never));
    EXPECT_EQ(make_union({make_never(), make_builtin("int")}), make_builtin("int"));
}

TEST(TypeSpec, UnionEqualityIgnoresMemberOrder) {
    TypeSpec a{TypeKind::union_, "", "", {make_builtin("int"), make_builtin("str")}, 0, std::nullopt};
    TypeSpec b{TypeKind::union_, "", "", {make_builtin("str"), make_builtin("int")}, 0, std::nullopt};
    EXPECT_EQ(a, b);
    EXPECT_EQ(hash_value(a), hash_value(b));
}

TEST(TypeSpec, EqualSpecsHashEqual) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        auto t = gen::random_type(rng, 3);
        auto copy = t;
        EXPECT_EQ(t, copy);
        EXPECT_EQ(hash_value(t), hash_value(copy));
        EXPECT_EQ(compare(t, copy), 0);
    }
}

TEST(TypeSpec, GenericArgumentOrderMatters) {
    auto a = make_generic("", "dict", {make_builtin("str"), make_builtin("int")});
    auto b = make_generic("", "dict", {make_builtin("int"), make_builtin("str")});
    EXPECT_NE(a, b);
}

TEST(TraceStore, RecordSumsCounts) {
    TraceStore s;
    s.record(add_key(), int_add(), 3);
    s.record(add_key(), int_add(), 2);
    EXPECT_EQ(s.entries[add_key()][int_add()], 5u);
    EXPECT_EQ(s.total_calls(add_key()), 5u);
}

TEST(TraceStore, CountsSaturate) {
    TraceStore s;
    s.record(add_key(), int_add(), max_trace_count);
    s.record(add_key(), int_add(), max_trace_count);
    EXPECT_EQ(s.entries[add_key()][int_add()], max_trace_count);
}

TEST(MergeStores, EmptyIsIdentity) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        auto s = gen::random_store(rng);
        EXPECT_EQ(merge_stores(s, TraceStore{}), s);
        EXPECT_EQ(merge_stores(TraceStore{}, s), s);
    }
}

TEST(MergeStores, AddsCounts) {
    TraceStore a, b;
    a.record(add_key(), int_add(), 3);
    b.record(add_key(), int_add(), 2);
    EXPECT_EQ(merge_stores(a, b).entries[add_key()][int_add()], 5u);
}

// naive multiset union: a flat list of (fn, trace) repeated by count
std::map<std::pair<FunctionKey, std::string>, std::uint64_t> flatten(TraceStore const& s) {
    std::map<std::pair<FunctionKey, std::string>, std::uint64_t> out;
    for (auto const& [fn, traces] : s.entries)
        for (auto const& [t, c] : traces) {
            auto& slot = out[{fn, trace_record({}, t, 1).dump()}];
            slot = saturating_add(slot, c);
        }
    return out;
}

TEST(MergeStores, CommutativeAssociativeAgainstMultisetUnion) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 300; ++i) {
        auto a = gen::random_store(rng), b = gen::random_store(rng), c = gen::random_store(rng);
        // share some keys so counts actually add
        if (!a.entries.empty()) b.entries[a.entries.begin()->first] = a.entries.begin()->second;
        auto ab = merge_stores(a, b);
        EXPECT_EQ(ab.entries, merge_stores(b, a).entries);
        EXPECT_EQ(merge_stores(ab, c).entries, merge_stores(a, merge_stores(b, c)).entries);

        auto expected = flatten(a);
        for (auto const& [k, n] : flatten(b)) expected[k] = saturating_add(expected[k], n);
        EXPECT_EQ(flatten(ab), expected);
    }
}

TEST(TraceIO, EmptyStoreIsHeaderOnly) {
    TraceStore s;
    s.seed = 42;
    auto text = serialize_store(s);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
    EXPECT_EQ(deserialize_store(text), s);
}

TEST(TraceIO, RecordFieldOrder) {
    auto rec = trace_record(add_key(), int_add(), 2).dump();
    EXPECT_EQ(rec,
              R"({"fn":{"path":"/w/add.py","qualname":"add","line":1},)"
              R"("args":[["a",{"kind":"concrete","module":"","name":"int","args":[],"typevar":null,"shape":null}],)"
              R"(["b",{"kind":"concrete","module":"","name":"int","args":[],"typevar":null,"shape":null}]],)"
              R"("ret":{"kind":"concrete","module":"","name":"int","args":[],"typevar":null,"shape":null},)"
              R"("yield":null,"send":null,"count":2})");
}

TEST(TraceIO, ReserializationIsByteIdentical) {
    TraceStore s;
    s.record(add_key(), int_add(), 1);
    auto once = serialize_store(s);
    EXPECT_EQ(serialize_store(deserialize_store(once)), once);
}

TEST(TraceIO, RoundTripRandomStores) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        auto s = gen::random_store(rng);
        auto text = serialize_store(s);
        auto back = deserialize_store(text);
        ASSERT_EQ(back, s) << text;
        ASSERT_EQ(serialize_store(back), text);
    }
}

TEST(TraceIO, TruncatedRecordNamesItsLine) {
    TraceStore s;
    s.record(add_key(), int_add(), 1);
    auto text = serialize_store(s);
    text = text.substr(0, text.size() - 10);
    try {
        deserialize_store(text);
        FAIL() << "expected a format error";
    } catch (FormatError const& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(TraceIO, RejectsBadRecords) {
    EXPECT_THROW(deserialize_store(std::string("{\"fn\": 3}\n")), FormatError);
    EXPECT_THROW(deserialize_store(std::string("not json\n")), FormatError);
    std::string bad_kind =
        R"({"fn":{"path":"p","qualname":"f","line":1},"args":[],"ret":{"kind":"wat","module":"","name":"x","args":[],"typevar":null,"shape":null},"yield":null,"send":null,"count":1})";
    EXPECT_THROW(deserialize_store(bad_kind + "\n"), FormatError);
    std::string zero_count =
        R"({"fn":{"path":"p","qualname":"f","line":1},"args":[],"ret":{"kind":"none","module":"","name":"None","args":[],"typevar":null,"shape":null},"yield":null,"send":null,"count":0})";
    EXPECT_THROW(deserialize_store(zero_count + "\n"), FormatError);
}

TEST(TraceIO, RequiresHeader) {
    auto line = trace_record(add_key(), int_add(), 4).dump() + "\n";
    try {
        deserialize_store(line);
        FAIL() << "accepted a header-less file";
    } catch (std::exception const& e) {
        EXPECT_NE(std::string(e.what()).find("header"), std::string::npos);
    }
}
