#include <gtest/gtest.h>

#include "tracetype/method_typer.hpp"

using namespace tracetype;

namespace {

TypeSpec cls(std::string const& n) { return make_concrete("shapes", n); }

CallTrace trace(std::vector<std::string> names, std::vector<TypeSpec> args, TypeSpec ret) {
    CallTrace t;
    t.arg_names = std::move(names);
    t.arg_types = std::move(args);
    t.return_type = std::move(ret);
    return t;
}

TypeHierarchy media() {
    std::map<QualifiedClass, TypeInfo> rec;
    rec[{"shapes", "Medium"}] = {{{"shapes", "Medium"}, {"builtins", "object"}}, {"draw"}};
    rec[{"shapes", "Screen"}] = {{{"shapes", "Screen"}, {"shapes", "Medium"}, {"builtins", "object"}}, {"draw"}};
    rec[{"shapes", "NonStandardMedium"}] = {{{"shapes", "NonStandardMedium"}, {"builtins", "object"}}, {"draw"}};
    return TypeHierarchy(rec);
}

Signature draw_sig(TypeSpec medium) {
    Signature s;
    s.fn = {"/shapes.py", "Line.draw", 10};
    s.params = {{"self", make_self(), false}, {"medium", std::move(medium), false}};
    return s;
}

DeclaredSignature parent_draw() {
    return DeclaredSignature{{{"self", std::nullopt, false}, {"medium", cls("Medium"), false}}, make_none()};
}

MethodContext line_ctx() {
    MethodContext ctx;
    ctx.defining_class = {"shapes", "Line"};
    ctx.overridden_in = QualifiedClass{"shapes", "Shape"};
    return ctx;
}

} // namespace

TEST(BindReceiver, InstanceReturningItself) {
    auto t = bind_receiver(trace({"self", "factor"}, {cls("Line"), make_builtin("float")}, cls("Line")),
                           ReceiverKind::instance);
    auto sig = generalize({"/shapes.py", "Line.zoom", 3}, std::vector<CallTrace>{t});
    EXPECT_EQ(to_string(sig), "(self: Self, factor: float) -> Self");
}

TEST(BindReceiver, SubclassReceiverStillSelf) {
    auto a = bind_receiver(trace({"self"}, {cls("Line")}, cls("Line")), ReceiverKind::instance);
    auto b = bind_receiver(trace({"self"}, {cls("DashedLine")}, cls("DashedLine")), ReceiverKind::instance);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.return_type, make_self());
}

TEST(BindReceiver, NestedOccurrences) {
    auto t = bind_receiver(
        trace({"self", "other"}, {cls("P"), make_generic("", "list", {cls("P")})}, make_generic("", "tuple", {cls("P"), cls("P")})),
        ReceiverKind::instance);
    EXPECT_EQ(repr(t.arg_types[1]), "list[Self]");
    EXPECT_EQ(repr(t.return_type), "tuple[Self, Self]");
}

TEST(BindReceiver, ClassReceiver) {
    auto t = bind_receiver(trace({"cls"}, {make_generic("", "type", {cls("P")})}, cls("P")), ReceiverKind::class_);
    EXPECT_EQ(repr(t.arg_types[0]), "type[Self]");
    EXPECT_EQ(t.return_type, make_self());
}

TEST(BindReceiver, NoReceiverUnchanged) {
    auto t = trace({"x"}, {cls("P")}, cls("P"));
    EXPECT_EQ(bind_receiver(t, ReceiverKind::none), t);
}

TEST(ApplySelf, ForcesReceiverSlot) {
    Signature s;
    s.fn = {"/m.py", "C.f", 1};
    s.params = {{"self", cls("C"), false}};
    MethodContext ctx;
    ctx.receiver = ReceiverKind::instance;
    EXPECT_EQ(apply_self(s, ctx).params[0].type, make_self());
    ctx.receiver = ReceiverKind::class_;
    EXPECT_EQ(repr(apply_self(s, ctx).params[0].type), "type[Self]");
    ctx.receiver = ReceiverKind::none;
    EXPECT_EQ(apply_self(s, ctx), s);
}

TEST(WidenOverride, UnrelatedObservedTypeIsUnioned) {
    auto out = widen_override(draw_sig(cls("NonStandardMedium")), line_ctx(), parent_draw(), media());
    EXPECT_EQ(repr(out.param("medium")->type), "shapes.Medium|shapes.NonStandardMedium");
}

TEST(WidenOverride, SubtypeReducesToParent) {
    auto out = widen_override(draw_sig(cls("Screen")), line_ctx(), parent_draw(), media());
    EXPECT_EQ(out.param("medium")->type, cls("Medium"));
}

TEST(WidenOverride, ReturnTypeLeftAsObserved) {
    auto s = draw_sig(cls("Screen"));
    s.return_type = make_builtin("int");
    auto out = widen_override(s, line_ctx(), parent_draw(), media());
    EXPECT_EQ(out.return_type, make_builtin("int"));
}

TEST(WidenOverride, ExemptNames) {
    for (auto const* n : {"C.__init__", "C.__new__", "C.__init_subclass__", "C.__post_init__"}) {
        EXPECT_TRUE(exempt_from_override(n));
        auto s = draw_sig(cls("NonStandardMedium"));
        s.fn.qualified_name = n;
        EXPECT_EQ(widen_override(s, line_ctx(), parent_draw(), media()), s);
    }
    EXPECT_FALSE(exempt_from_override("C.draw"));
}

TEST(WidenOverride, UnannotatedParentSlotUnchanged) {
    DeclaredSignature parent{{{"self", std::nullopt, false}, {"medium", std::nullopt, false}}, std::nullopt};
    auto s = draw_sig(cls("NonStandardMedium"));
    EXPECT_EQ(widen_override(s, line_ctx(), parent, media()).params, s.params);
}

// Every widened slot admits what the parent declared.
TEST(WidenOverride, AdmitsParentDeclaration) {
    auto h = media();
    std::vector<TypeSpec> pool = {cls("Medium"), cls("Screen"), cls("NonStandardMedium"), make_builtin("int"),
                                  make_builtin("str"), make_none(),
                                  make_union({make_builtin("int"), make_builtin("str")})};
    for (auto const& observed : pool)
        for (auto const& declared : pool) {
            DeclaredSignature parent{{{"self", std::nullopt, false}, {"medium", declared, false}}, std::nullopt};
            auto out = widen_override(draw_sig(observed), line_ctx(), parent, h);
            EXPECT_TRUE(h.is_subtype(declared, out.param("medium")->type))
                << repr(observed) << " / " << repr(declared) << " -> " << repr(out.param("medium")->type);
            EXPECT_TRUE(h.is_subtype(observed, out.param("medium")->type));
        }
}

TEST(ParentDeclaration, InlineWinsOverStubs) {
    auto ctx = line_ctx();
    ctx.overridden = parent_draw();
    StubRepository stubs({TRACETYPE_FIXTURES "/stubs"});
    EXPECT_EQ(parent_declaration(ctx, "draw", &stubs), parent_draw());
}

TEST(ParentDeclaration, FallsBackToStubs) {
    MethodContext ctx;
    ctx.overridden_in = QualifiedClass{"shapes_pkg.base", "Medium"};
    StubRepository stubs({TRACETYPE_FIXTURES "/stubs"});
    auto d = parent_declaration(ctx, "draw", &stubs);
    ASSERT_TRUE(d);
    ASSERT_EQ(d->params.size(), 3u);
    EXPECT_EQ(d->params[1].type, make_builtin("str"));
    EXPECT_FALSE(parent_declaration(ctx, "draw", nullptr));
}
