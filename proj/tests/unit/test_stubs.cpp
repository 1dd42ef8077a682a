#include <gtest/gtest.h>

#include "tracetype/stubs.hpp"

using namespace tracetype;

namespace {

StubRepository repo(std::string const& version = "3.12") {
    StubEnvironment env;
    env.version = TargetVersion::parse(version);
    return StubRepository({TRACETYPE_FIXTURES "/stubs"}, env);
}

} // namespace

TEST(Stubs, PlainMethod) {
    auto r = repo();
    auto d = r.lookup("shapes_pkg.base", "Medium.draw");
    ASSERT_TRUE(d);
    ASSERT_EQ(d->params.size(), 3u);
    EXPECT_EQ(d->params[0].name, "self");
    EXPECT_FALSE(d->params[0].type);
    EXPECT_EQ(d->params[1].type, make_builtin("str"));
    EXPECT_EQ(d->params[2].type, make_builtin("int"));
    EXPECT_TRUE(d->params[2].has_default);
    EXPECT_EQ(d->return_type, make_none());
}

TEST(Stubs, OverloadsUnionPerSlot) {
    auto r = repo();
    auto d = r.lookup("shapes_pkg.base", "Screen.scale");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->params[1].type, make_union({make_builtin("int"), make_builtin("float")}));
    EXPECT_EQ(d->return_type, make_union({make_builtin("int"), make_builtin("float")}));
}

TEST(Stubs, VersionGuards) {
    auto modern = repo("3.12");
    auto old = repo("3.9");
    EXPECT_EQ(modern.lookup("shapes_pkg.base", "Screen.resize")->params[1].type, make_builtin("int"));
    EXPECT_EQ(old.lookup("shapes_pkg.base", "Screen.resize")->params[1].type, make_builtin("float"));
}

TEST(Stubs, UnannotatedParameter) {
    auto r = repo();
    auto d = r.lookup("shapes_pkg.base", "Screen.blank");
    ASSERT_TRUE(d);
    EXPECT_FALSE(d->params[1].type);
}

TEST(Stubs, FollowsReExport) {
    auto r = repo();
    auto d = r.lookup("shapes_pkg", "Medium.draw");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->params[1].type, make_builtin("str"));
}

TEST(Stubs, MissingNames) {
    auto r = repo();
    EXPECT_FALSE(r.lookup("shapes_pkg.base", "Medium.nope"));
    EXPECT_FALSE(r.lookup("no_such_module", "X.f"));
}

TEST(Stubs, MalformedStubSkippedWithWarning) {
    auto r = repo();
    EXPECT_FALSE(r.lookup("broken", "Oops.f"));
    ASSERT_EQ(r.warnings().size(), 1u);
    EXPECT_NE(r.warnings()[0].find("broken.pyi"), std::string::npos);
}
