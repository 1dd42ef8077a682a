#include <gtest/gtest.h>
#include <pybind11/embed.h>

#include <fstream>

#include "tracetype/generalizer.hpp"
#include "tracetype/runtime/runner.hpp"

using namespace tracetype;
using namespace tracetype::runtime;
namespace fs = std::filesystem;

namespace {

class AgentTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("tracetype-agent-" + std::to_string(::getpid()) + "-" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    RunOutcome run(std::string const& source, AgentConfig cfg = {}) {
        auto script = dir_ / "prog.py";
        std::ofstream(script) << source;
        RunRequest req;
        req.target = script.string();
        req.agent = cfg;
        return run_in_interpreter(req, false);
    }

    static TraceCounts const* traces_of(TraceStore const& s, std::string const& qualname) {
        for (auto const& [fn, counts] : s.entries)
            if (fn.qualified_name == qualname) return &counts;
        return nullptr;
    }

    static std::vector<std::string> rendered(TraceStore const& s, std::string const& qualname) {
        std::vector<std::string> out;
        if (auto const* c = traces_of(s, qualname))
            for (auto const& [t, _] : *c) out.push_back(to_string(generalize({"", qualname, 0}, std::vector<CallTrace>{t})));
        return out;
    }

    fs::path dir_;
};

} // namespace

TEST_F(AgentTest, RecordsDistinctTraces) {
    auto out = run("def add(a, b):\n    return a + b\n\nadd(10, 20)\nadd('foo', 'bar')\n");
    ASSERT_FALSE(out.tool_error) << out.error;
    EXPECT_EQ(out.exit_code, 0);
    auto r = rendered(out.store, "add");
    std::sort(r.begin(), r.end());
    EXPECT_EQ(r, (std::vector<std::string>{"(a: int, b: int) -> int", "(a: str, b: str) -> str"}));
}

TEST_F(AgentTest, ZeroArgumentFunction) {
    auto out = run("def f():\n    return 1\n\nf()\n");
    EXPECT_EQ(rendered(out.store, "f"), (std::vector<std::string>{"() -> int"}));
}

TEST_F(AgentTest, EmptyScriptRecordsNothing) {
    auto out = run("");
    EXPECT_EQ(out.exit_code, 0);
    EXPECT_TRUE(out.store.entries.empty());
}

TEST_F(AgentTest, GeneratorYieldsAndReturn) {
    auto out = run("def gen():\n    yield 1\n    yield 2\n    yield 3\n\nlist(gen())\n");
    auto const* c = traces_of(out.store, "gen");
    ASSERT_TRUE(c);
    ASSERT_EQ(c->size(), 1u);
    auto const& t = c->begin()->first;
    ASSERT_TRUE(t.yield_type);
    EXPECT_EQ(repr(*t.yield_type), "int");
    EXPECT_EQ(t.return_type, make_none());
}

TEST_F(AgentTest, MixedYields) {
    auto out = run("def gen():\n    yield 1\n    yield 'a'\n\nfor _ in gen():\n    pass\n");
    auto const* c = traces_of(out.store, "gen");
    ASSERT_TRUE(c);
    EXPECT_EQ(repr(*c->begin()->first.yield_type), "int|str");
}

TEST_F(AgentTest, YieldedContainer) {
    auto out = run("def gen():\n    yield [1, 2, 3]\n\nlist(gen())\n");
    EXPECT_EQ(repr(*traces_of(out.store, "gen")->begin()->first.yield_type), "list[int]");
}

TEST_F(AgentTest, SendTypeRecorded) {
    auto out = run("def acc():\n    total = 0\n    while True:\n        x = yield total\n        if x is None:\n"
                   "            return total\n        total += x\n\n"
                   "g = acc()\nnext(g)\ng.send(42)\ntry:\n    g.send(None)\nexcept StopIteration:\n    pass\n");
    auto const* c = traces_of(out.store, "acc");
    ASSERT_TRUE(c);
    auto const& t = c->begin()->first;
    ASSERT_TRUE(t.send_type);
    EXPECT_EQ(repr(*t.send_type), "None|int");
    EXPECT_EQ(repr(*t.yield_type), "int");
}

TEST_F(AgentTest, SendInstrumentationPreservesBehavior) {
    auto out = run("def g():\n    got = yield 1\n    print(got)\n\nit = g()\nnext(it)\ntry:\n    it.send('s')\n"
                   "except StopIteration:\n    pass\n");
    EXPECT_EQ(out.exit_code, 0);
    EXPECT_EQ(repr(*traces_of(out.store, "g")->begin()->first.send_type), "str");
}

TEST_F(AgentTest, IntrospectionFailureBecomesAny) {
    auto out = run("class Alias:\n    @property\n    def __args__(self):\n        raise RuntimeError('boom')\n\n"
                   "class Box:\n    pass\n\nb = Box()\nb.__orig_class__ = Alias()\n\n"
                   "def f(a, b):\n    return b\n\nf(b, 3)\nprint('still running')\n");
    ASSERT_FALSE(out.tool_error);
    EXPECT_EQ(out.exit_code, 0);
    EXPECT_EQ(rendered(out.store, "f"), (std::vector<std::string>{"(a: Any, b: int) -> int"}));
}

TEST_F(AgentTest, HostileAttributeAccessIsHarmless) {
    auto out = run("class Hostile:\n    def __getattribute__(self, name):\n        raise RuntimeError(name)\n"
                   "    @property\n    def __class__(self):\n        raise RuntimeError('class')\n\n"
                   "def f(a, b):\n    return b\n\nf(Hostile(), 3)\n");
    ASSERT_FALSE(out.tool_error);
    EXPECT_EQ(out.exit_code, 0);
    auto r = rendered(out.store, "f");
    ASSERT_EQ(r.size(), 1u);
    // the runtime class is read natively, so the value is still named
    EXPECT_EQ(r[0], "(a: prog.Hostile, b: int) -> int");
}

TEST_F(AgentTest, ExceptionPropagatesAndExitStatus) {
    auto out = run("def boom():\n    raise ValueError('x')\n\ntry:\n    boom()\nexcept ValueError:\n    pass\nboom()\n");
    EXPECT_FALSE(out.tool_error);
    EXPECT_EQ(out.exit_code, 1);
    EXPECT_FALSE(traces_of(out.store, "boom")); // exceptional exits are not calls that returned
}

TEST_F(AgentTest, GeneratorFailingAfterYield) {
    auto out = run("def gen():\n    yield 1\n    raise KeyError\n\ntry:\n    list(gen())\nexcept KeyError:\n    pass\n");
    auto const* c = traces_of(out.store, "gen");
    ASSERT_TRUE(c);
    EXPECT_EQ(c->begin()->first.return_type, make_never());
    EXPECT_EQ(repr(*c->begin()->first.yield_type), "int");
}

TEST_F(AgentTest, SystemExitCode) {
    EXPECT_EQ(run("import sys\nsys.exit(7)\n").exit_code, 7);
    EXPECT_EQ(run("raise SystemExit\n").exit_code, 0);
}

TEST_F(AgentTest, MethodsCarryContext) {
    auto out = run("class Base:\n    def f(self, x: int) -> None:\n        pass\n\nclass Sub(Base):\n"
                   "    def f(self, x):\n        return self\n\nSub().f(1)\n");
    FunctionKey key;
    for (auto const& [fn, _] : out.store.entries)
        if (fn.qualified_name == "Sub.f") key = fn;
    ASSERT_EQ(key.qualified_name, "Sub.f");
    auto it = out.store.methods.find(key);
    ASSERT_NE(it, out.store.methods.end());
    EXPECT_EQ(it->second.receiver, ReceiverKind::instance);
    ASSERT_TRUE(it->second.overridden_in);
    EXPECT_EQ(it->second.overridden_in->name, "Base");
    ASSERT_TRUE(it->second.overridden);
    EXPECT_EQ(it->second.overridden->params[1].type, make_builtin("int"));
}

TEST_F(AgentTest, EveryExecutedFunctionSampled) {
    std::string src;
    for (int i = 0; i < 200; ++i) src += "def f" + std::to_string(i) + "(x):\n    return x + " + std::to_string(i) + "\n\n";
    for (int i = 0; i < 200; ++i) src += "f" + std::to_string(i) + "(" + std::to_string(i) + ")\n";
    auto out = run(src);
    std::size_t traced = 0;
    for (int i = 0; i < 200; ++i) traced += traces_of(out.store, "f" + std::to_string(i)) ? 1 : 0;
    EXPECT_EQ(traced, 200u);
}

TEST_F(AgentTest, HotFunctionSampledNotCounted) {
    auto out = run("def f(x):\n    return x\n\nfor i in range(200000):\n    f(i)\n");
    auto const* c = traces_of(out.store, "f");
    ASSERT_TRUE(c);
    ASSERT_EQ(c->size(), 1u);
    EXPECT_LT(c->begin()->second, 200000u);
    EXPECT_GE(c->begin()->second, 1u);
}

TEST_F(AgentTest, ExcludeFilter) {
    AgentConfig cfg;
    cfg.exclude = {"*prog.py"};
    auto out = run("def f():\n    pass\nf()\n", cfg);
    EXPECT_TRUE(out.store.entries.empty());
}
