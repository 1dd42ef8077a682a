// Acceptance checks: one PASS/FAIL line per criterion. Pass criterion
// numbers as arguments to run a subset.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "support/process.hpp"
#include "tracetype/generalizer.hpp"
#include "tracetype/sampling.hpp"
#include "tracetype/trace_io.hpp"

namespace fs = std::filesystem;
using namespace tracetype;

namespace {

const fs::path kFixtures = TRACETYPE_FIXTURES;
const std::string kCli = TRACETYPE_CLI;
const std::string kPython = TRACETYPE_PYTHON;
const std::string kPyright = TRACETYPE_PYRIGHT;

struct Verdict {
    bool pass = false;
    std::string detail;
};

fs::path scratch(std::string const& name) {
    auto d = fs::temp_directory_path() / ("tracetype-acceptance-" + std::to_string(::getpid())) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string read(fs::path const& p) { return proc::slurp(p); }

// Drops trailing whitespace on each line and blank lines.
std::string normalize(std::string const& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) {
        auto end = line.find_last_not_of(" \t\r");
        if (end == std::string::npos) continue;
        out += line.substr(0, end + 1) + "\n";
    }
    return out;
}

std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

proc::Result cli(std::vector<std::string> args, fs::path const& cwd) {
    args.insert(args.begin(), kCli);
    return proc::run(args, cwd);
}

// ---------------------------------------------------------------- 1

Verdict litmus() {
    auto dir = scratch("litmus");
    const std::vector<std::string> names = {"interdependent", "unnamed", "inheritance", "edge_case"};
    std::string detail;
    bool ok = true;
    for (auto const& n : names) {
        fs::copy_file(kFixtures / "litmus" / (n + ".py"), dir / (n + ".py"));
        auto r = cli({"--seed", "1", "-o", n + ".jsonl", "run", n + ".py"}, dir);
        if (r.status != 0) return {false, n + ": run failed: " + r.err};
        r = cli({"annotate", "--overwrite", n + ".jsonl"}, dir);
        if (r.status != 0) return {false, n + ": annotate failed: " + r.err};
        bool same = normalize(read(dir / (n + ".py"))) == normalize(read(kFixtures / "litmus" / "golden" / (n + ".py")));
        ok = ok && same;
        detail += n + (same ? " golden ok" : " GOLDEN MISMATCH");

        if (kPyright.empty()) return {false, "pyright not found"};
        auto pr = proc::run({kPyright, "--outputjson", "--pythonversion", "3.12", n + ".py"}, dir);
        int errors = -1;
        std::vector<std::string> rules;
        try {
            auto j = nlohmann::json::parse(pr.out);
            errors = j["summary"]["errorCount"].get<int>();
            for (auto const& d : j["generalDiagnostics"])
                if (d.value("severity", "") == "error")
                    rules.push_back(d.value("rule", "") + ": " + d.value("message", ""));
        } catch (std::exception const& e) {
            return {false, n + ": cannot read pyright output: " + std::string(e.what())};
        }
        bool want_one = n == "edge_case";
        bool checker_ok = want_one ? errors == 1 && rules.size() == 1 &&
                                         rules[0].find("must return value on all code paths") != std::string::npos
                                   : errors == 0;
        ok = ok && checker_ok;
        detail += ", " + std::to_string(errors) + " checker error(s)" + (checker_ok ? "" : " (UNEXPECTED)") + "; ";
    }
    return {ok, detail};
}

// ---------------------------------------------------------------- 2

Verdict overhead() {
    auto dir = scratch("overhead");
    const std::vector<std::string> benches = {"sudoku", "nbody", "spectral_norm", "fannkuch"};
    bool ok = true;
    double sum = 0;
    std::string detail;
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    for (auto const& b : benches) {
        auto script = (kFixtures / "bench" / (b + ".py")).string();
        std::vector<double> base, traced;
        std::string expected;
        bool same_output = true;
        for (int i = 0; i < 3; ++i) {
            auto r0 = proc::run({kPython, script}, dir);
            auto r1 = cli({"-o", (dir / (b + ".jsonl")).string(), "run", script}, dir);
            if (r0.status != 0 || r1.status != 0) return {false, b + ": run failed: " + r0.err + r1.err};
            if (expected.empty()) expected = r0.out;
            same_output = same_output && r0.out == expected && r1.out == expected;
            base.push_back(r0.seconds);
            traced.push_back(r1.seconds);
        }
        double mb = median(base), mt = median(traced);
        double slowdown = mt / mb - 1.0;
        sum += slowdown;
        bool bench_ok = slowdown <= 1.0 && mb >= 5.0 && same_output;
        ok = ok && bench_ok;
        detail += b + " base " + fmt(mb) + "s traced " + fmt(mt) + "s slowdown " + fmt(slowdown) + "x" +
                  (mb < 5.0 ? " (BASELINE UNDER 5s)" : "") + (same_output ? "" : " (OUTPUT DIFFERS)") + "; ";
    }
    double mean = sum / static_cast<double>(benches.size());
    ok = ok && mean <= 0.5;
    return {ok, detail + "mean " + fmt(mean) + "x"};
}

// ---------------------------------------------------------------- 3

Verdict coverage() {
    auto dir = scratch("coverage");
    std::ofstream prog(dir / "many.py");
    for (int i = 0; i < 200; ++i) prog << "def f" << i << "(x):\n    return x * " << i << "\n\n\n";
    for (int i = 0; i < 200; ++i) prog << "f" << i << "(" << (i % 2 ? "1.5" : "'s'") << ")\n";
    prog.close();
    auto r = cli({"-o", "many.jsonl", "run", "many.py"}, dir);
    if (r.status != 0) return {false, "run failed: " + r.err};
    std::ifstream in(dir / "many.jsonl");
    auto store = deserialize_store(in);
    std::set<std::string> traced;
    for (auto const& [fn, counts] : store.entries)
        if (!counts.empty()) traced.insert(fn.qualified_name);
    int covered = 0;
    for (int i = 0; i < 200; ++i) covered += traced.count("f" + std::to_string(i)) ? 1 : 0;
    return {covered == 200, std::to_string(covered) + "/200 functions traced"};
}

// ---------------------------------------------------------------- 4

Verdict controller() {
    const std::vector<std::pair<int, int>> budgets = {{1, 20}, {1, 10}, {3, 10}, {1, 2}, {1, 1}};
    long checks = 0;
    for (auto [bn, bd] : budgets) {
        for (unsigned pattern = 0; pattern < (1u << 10); ++pattern) {
            std::vector<bool> ticks;
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i < 10; ++i) ticks.push_back(((pattern >> i) & 1u) != 0);
            auto expected = oracle::windowed_fractions(ticks, 10);
            SamplingConfig cfg;
            cfg.budget = static_cast<double>(bn) / bd;
            cfg.window = 10;
            SamplingController c(cfg);
            for (std::size_t i = 0; i < ticks.size(); ++i) {
                LocationState loc;
                c.disable(loc);
                bool fired = c.profile_tick(ticks[i]);
                bool want = oracle::below_budget(expected[i], bn, bd);
                ++checks;
                if (fired != want || c.is_disabled(loc) == want)
                    return {false, "pattern " + std::to_string(pattern) + " tick " + std::to_string(i) + " budget " +
                                       std::to_string(bn) + "/" + std::to_string(bd)};
            }
        }
    }
    return {true, "1024 patterns x " + std::to_string(budgets.size()) + " budgets, " + std::to_string(checks) + " ticks"};
}

// ---------------------------------------------------------------- 5

TypeSpec from_oracle(std::string const& s) {
    if (oracle::is_list(s)) return make_generic("", "list", {from_oracle(oracle::list_arg(s))});
    if (s == "None") return make_none();
    return make_builtin(s);
}

Verdict generalizer_oracle() {
    std::mt19937_64 rng(20240611);
    const std::vector<std::string> names = {"a", "b"};
    const int sets = 12000;
    int typevar_sets = 0;
    for (int iter = 0; iter < sets; ++iter) {
        int n = gen::uniform(rng, 1, 4);
        int params = gen::uniform(rng, 0, 2);
        // half the sets draw from a small pool, which makes shared columns common
        std::vector<std::string> pool;
        if (iter % 2)
            for (int k = gen::uniform(rng, 2, 3); k > 0; --k) pool.push_back(oracle::random_type(rng, 2));
        auto draw = [&] { return pool.empty() ? oracle::random_type(rng, 2) : pool[static_cast<std::size_t>(gen::uniform(rng, 0, static_cast<int>(pool.size()) - 1))]; };
        std::vector<std::vector<std::string>> raw;
        std::vector<CallTrace> traces;
        for (int i = 0; i < n; ++i) {
            std::vector<std::string> slots;
            for (int s = 0; s <= params; ++s) slots.push_back(draw());
            CallTrace t;
            for (int s = 0; s < params; ++s) {
                t.arg_names.push_back(names[static_cast<std::size_t>(s)]);
                t.arg_types.push_back(from_oracle(slots[static_cast<std::size_t>(s)]));
            }
            t.return_type = from_oracle(slots.back());
            raw.push_back(slots);
            traces.push_back(t);
        }
        auto want = oracle::Generalizer(raw).render(names);
        auto got = to_string(generalize({"/x.py", "f", 1}, traces));
        if (got != want) return {false, "set " + std::to_string(iter) + ": got " + got + ", oracle " + want};
        typevar_sets += want.find(" where ") != std::string::npos ? 1 : 0;
    }
    return {true, std::to_string(sets) + " trace sets agree (" + std::to_string(typevar_sets) + " with typevars)"};
}

// ---------------------------------------------------------------- 6

Verdict filter_oracle() {
    std::mt19937_64 rng(99);
    const std::vector<std::pair<double, int>> coverages = {{0.5, 50}, {0.8, 80}, {0.95, 95}};
    const int sets = 30000;
    for (int iter = 0; iter < sets; ++iter) {
        int n = gen::uniform(rng, 1, 8);
        TraceCounts tc;
        std::vector<oracle::Weighted> items;
        for (int i = 0; i < n; ++i) {
            CallTrace t;
            t.arg_names = {"x"};
            t.arg_types = {make_concrete("m", "T" + std::to_string(i))};
            t.return_type = make_none();
            auto c = static_cast<std::uint64_t>(gen::uniform(rng, 1, 100));
            tc[t] = c;
            items.push_back({serialized_form(t), c});
        }
        auto [cov, pct] = coverages[static_cast<std::size_t>(iter % 3)];
        auto r = filter_traces(tc, cov);
        std::vector<std::string> got;
        for (auto const& w : r.retained) got.push_back(serialized_form(w.trace));
        if (got != oracle::minimal_prefix(items, pct))
            return {false, "multiset " + std::to_string(iter) + " at coverage " + fmt(cov)};
    }
    return {true, std::to_string(sets) + " multisets agree"};
}

// ---------------------------------------------------------------- 7

Verdict round_trip() {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        auto s = gen::random_store(rng);
        auto text = serialize_store(s);
        auto back = deserialize_store(text);
        if (!(back == s) || serialize_store(back) != text) return {false, "store " + std::to_string(i) + " did not round-trip"};
    }
    auto dir = scratch("determinism");
    std::vector<std::string> traces;
    for (auto const* n : {"interdependent", "unnamed", "inheritance", "edge_case"}) {
        fs::copy_file(kFixtures / "litmus" / (std::string(n) + ".py"), dir / (std::string(n) + ".py"));
        auto r = cli({"--seed", "3", "-o", std::string(n) + ".jsonl", "run", std::string(n) + ".py"}, dir);
        if (r.status != 0) return {false, std::string(n) + ": run failed"};
        traces.push_back(std::string(n) + ".jsonl");
    }
    std::string first, first_report;
    for (int run = 0; run < 3; ++run) {
        std::vector<std::string> args = {"annotate", "--diff", "--report", "report.jsonl"};
        args.insert(args.end(), traces.begin(), traces.end());
        auto r = cli(args, dir);
        if (r.status != 0) return {false, "annotate failed: " + r.err};
        auto report = read(dir / "report.jsonl");
        if (run == 0) {
            first = r.out;
            first_report = report;
        } else if (r.out != first || report != first_report) {
            return {false, "annotate output differs on run " + std::to_string(run + 1)};
        }
    }
    if (first.empty()) return {false, "annotate produced no diff"};
    return {true, "1000 stores round-trip; 3 annotate runs byte-identical (" + std::to_string(first.size()) + " bytes)"};
}

// ---------------------------------------------------------------- 8

std::string exception_type(std::string const& err) {
    if (err.find("Traceback (most recent call last)") == std::string::npos) return "";
    auto end = err.find_last_not_of('\n');
    if (end == std::string::npos) return "";
    auto start = err.rfind('\n', end);
    auto last = err.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1) + 1);
    return last.substr(0, last.find(':'));
}

Verdict non_interference() {
    auto dir = scratch("differential");
    for (auto const& e : fs::directory_iterator(kFixtures / "differential"))
        if (e.path().extension() == ".py") fs::copy_file(e.path(), dir / e.path().filename());
    std::vector<std::string> programs;
    for (auto const& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".py" && e.path().stem().string().find("helper") == std::string::npos)
            programs.push_back(e.path().filename().string());
    std::sort(programs.begin(), programs.end());
    int same = 0, raised = 0;
    std::string bad;
    for (auto const& p : programs) {
        auto plain = proc::run({kPython, p, "alpha", "beta"}, dir);
        auto traced = cli({"-o", "trace.jsonl", "run", p, "alpha", "beta"}, dir);
        auto t0 = exception_type(plain.err), t1 = exception_type(traced.err);
        raised += t0.empty() ? 0 : 1;
        if (plain.out == traced.out && plain.status == traced.status && t0 == t1) ++same;
        else bad += " " + p;
    }
    bool ok = programs.size() >= 20 && same == static_cast<int>(programs.size());
    return {ok, std::to_string(same) + "/" + std::to_string(programs.size()) + " programs identical (" +
                    std::to_string(raised) + " raise uncaught)" + (bad.empty() ? "" : "; differ:" + bad)};
}

// ---------------------------------------------------------------- 9

Verdict numeric_tower() {
    std::string detail;
    bool ok = true;
    for (auto const& row : oracle::numeric_tower_table) {
        std::vector<CallTrace> traces;
        for (auto const& s : row.input) {
            CallTrace t;
            t.arg_names = {"x"};
            t.arg_types = {from_oracle(s)};
            t.return_type = make_none();
            traces.push_back(t);
        }
        auto sig = generalize({"/x.py", "f", 1}, traces);
        auto got = repr(sig.params[0].type);
        std::string in;
        for (auto const& s : row.input) in += (in.empty() ? "" : ",") + s;
        bool row_ok = got == row.expected && sig.typevars.empty();
        ok = ok && row_ok;
        detail += "{" + in + "}->" + got + (row_ok ? "" : " (want " + row.expected + ")") + "; ";
    }
    return {ok, detail};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"litmus goldens and checker errors", litmus},
        {"overhead gate", overhead},
        {"coverage of 200 functions", coverage},
        {"sampling controller exhaustive", controller},
        {"generalizer vs brute-force oracle", generalizer_oracle},
        {"trace filter vs minimal-prefix oracle", filter_oracle},
        {"round trip and determinism", round_trip},
        {"non-interference", non_interference},
        {"numeric tower", numeric_tower},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        int n = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(n)) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (std::exception const& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << criteria[i].first << "): " << v.detail
                  << std::endl;
    }
    fs::remove_all(fs::temp_directory_path() / ("tracetype-acceptance-" + std::to_string(::getpid())));
    return failed == 0 ? 0 : 1;
}
