#include <sys/wait.h>

#include <cstdio>
#include <regex>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "numabench/datagen.hpp"
#include "numabench/topology.hpp"
#include "test_support.hpp"

using nlohmann::json;
using testing::TempDir;

namespace {

struct Outcome {
    int status = -1;
    std::string out;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Outcome cli(const std::string& args) {
    const std::string cmd = quote(NUMABENCH_EXE) + " " + args + " 2>/dev/null";
    Outcome o;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof(buf), p)) > 0) o.out.append(buf, n);
    const int raw = pclose(p);
    o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return o;
}

std::string fixture(const char* name) { return quote(testing::fixture(name).string()); }

std::set<std::string> documented_flags(const std::string& help) {
    std::set<std::string> flags;
    static const std::regex re(R"(--[a-z][a-z-]*)");
    for (auto it = std::sregex_iterator(help.begin(), help.end(), re); it != std::sregex_iterator(); ++it)
        flags.insert(it->str());
    flags.erase("--help");
    return flags;
}

std::set<std::string> flags_in(const std::string& cmdline) { return documented_flags(cmdline); }

}  // namespace

TEST_CASE("help and usage errors") {
    const Outcome help = cli("--help");
    CHECK(help.status == 0);
    for (const char* sub : {"topo", "gen", "run", "microbench", "advise", "report"}) {
        CHECK(help.out.find(sub) != std::string::npos);
        CHECK(cli(std::string(sub) + " --help").status == 0);
    }
    CHECK(help.out.find("cell") == std::string::npos);
    CHECK(cli("").status == 2);
    CHECK(cli("frobnicate").status == 2);
    CHECK(cli("topo --frobnicate").status == 2);
    CHECK(cli("run").status == 2);  // --out is required
    CHECK(cli("--scale huge topo").status == 2);
    CHECK(cli("--format xml topo").status == 2);
    CHECK(cli("topo extra").status == 2);
}

TEST_CASE("topo") {
    const Outcome text = cli("--topology-fixture " + fixture("machine_c.json") + " topo");
    CHECK(text.status == 0);
    CHECK(text.out.find("distance") != std::string::npos);
    CHECK(text.out.find("2.100") != std::string::npos);
    CHECK(text.out.find("0-3") != std::string::npos);

    const Outcome j = cli("--format json --topology-fixture " + fixture("machine_a.json") +
                          " topo --plan sparse --threads 4");
    REQUIRE(j.status == 0);
    const json parsed = json::parse(j.out);
    CHECK(parsed.at("plan").at("assignment") == json::array({0, 2, 4, 6}));
    json topo_only = parsed;
    topo_only.erase("plan");
    CHECK(numabench::Topology::deserialize(topo_only.dump()) ==
          numabench::Topology::load_fixture(testing::fixture("machine_a.json")));

    CHECK(cli("topo").status == 0);
    CHECK(cli("--topology-fixture /nonexistent.json topo").status == 1);
}

TEST_CASE("gen writes records and a manifest") {
    TempDir dir;
    const Outcome o = cli("gen --dataset sequential --n 8 --c 4 --out " + quote(dir.path().string()));
    REQUIRE(o.status == 0);
    const auto records = numabench::load_records(dir / "records.bin");
    std::vector<std::uint64_t> keys;
    for (const auto& r : records) keys.push_back(r.key);
    CHECK(keys == std::vector<std::uint64_t>{0, 0, 1, 1, 2, 2, 3, 3});
    const json manifest = json::parse(testing::read_file(dir / "manifest.json"));
    CHECK(manifest.at("n") == 8);

    CHECK(cli("gen --dataset join --build-n 50 --out " + quote(dir.path().string())).status == 0);
    CHECK(numabench::load_records(dir / "probe.bin").size() == 800);
    CHECK(cli("gen --dataset sequential --n 2 --c 4 --out " + quote(dir.path().string())).status == 2);
    CHECK(cli("gen --dataset nope --out " + quote(dir.path().string())).status == 2);
}

TEST_CASE("run, then report") {
    TempDir dir;
    dir.write("m.json", R"({"workloads": ["W1", "W2"], "threads": [1, 2], "repetitions": 2,
                             "dataset": {"n": 5000, "c": 50}})");
    const std::string out = (dir / "results").string();
    const Outcome run = cli("run --matrix " + quote((dir / "m.json").string()) + " --out " + quote(out));
    REQUIRE(run.status == 0);
    CHECK(run.out.find("W2") != std::string::npos);
    const std::string runs = testing::read_file(dir / "results/runs.jsonl");
    CHECK(std::count(runs.begin(), runs.end(), '\n') == 4);
    const std::string csv = testing::read_file(dir / "results/summary.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

    const Outcome rep = cli("report --runs " + quote(out + "/runs.jsonl") + " --baseline 1");
    CHECK(rep.status == 0);
    CHECK(rep.out.find("W1") != std::string::npos);

    dir.write("empty.json", R"({"threads": []})");
    CHECK(cli("run --matrix " + quote((dir / "empty.json").string()) + " --out " + quote(out)).status == 2);
    CHECK(cli("run --out " + quote(out) + " --allocator /nonexistent/lib.so").status == 2);
    CHECK(cli("report --runs /nonexistent.jsonl").status == 1);
}

TEST_CASE("a failing cell makes run exit nonzero") {
    TempDir dir;
    const Outcome o = cli("run --out " + quote(dir.path().string()) +
                          " --workload W2 --mempolicy preferred:63 --repetitions 2");
    CHECK(o.status == 1);
}

TEST_CASE("microbench") {
    const Outcome o = cli("--format json microbench --threads 2 --ops 5000");
    REQUIRE(o.status == 0);
    const json j = json::parse(o.out);
    CHECK(j.at("ops_completed") == 10000);
    CHECK(j.at("valid") == true);
}

TEST_CASE("advise from recorded calibration") {
    TempDir dir;
    dir.write("sys/kernel/mm/transparent_hugepage/enabled", "[always] madvise never\n");
    dir.write("proc/sys/kernel/numa_balancing", "1\n");
    dir.write("cal.json", R"([{"id": "A", "path": "/opt/libA.so", "elapsed": 3, "overhead_ratio": 1.2},
                               {"id": "B", "path": "/opt/libB.so", "elapsed": 5, "overhead_ratio": 1.1},
                               {"id": "C", "path": "/opt/libC.so", "elapsed": 2, "overhead_ratio": 2.5}])");
    const std::string base = "--topology-fixture " + fixture("machine_a.json") + " --format json advise --os-root " +
                             quote(dir.path().string()) + " --calibration " + quote((dir / "cal.json").string());
    const Outcome o = cli(base);
    REQUIRE(o.status == 0);
    const json j = json::parse(o.out);
    std::vector<std::string> ids;
    for (const auto& r : j.at("recommendations")) ids.push_back(r.at("id"));
    CHECK(ids == std::vector<std::string>{"disable-thp", "disable-numa-balancing", "use-interleave", "pin-sparse",
                                          "use-allocator"});
    CHECK(j.at("excluded")[0].at("id") == "allocator-excluded:C");
    CHECK(j.at("prefix").get<std::string>().find("LD_PRELOAD=/opt/libA.so") != std::string::npos);

    const Outcome set = cli(base + " --privileged-set");
    REQUIRE(set.status == 0);
    CHECK(testing::read_file(dir / "proc/sys/kernel/numa_balancing") == "0\n");
    CHECK(testing::read_file(dir / "sys/kernel/mm/transparent_hugepage/enabled") == "never\n");
}

TEST_CASE("every documented flag parses") {
    TempDir dir;
    const std::string d = quote(dir.path().string());
    dir.write("m.json", R"({"dataset": {"n": 2000, "c": 20}})");
    dir.write("cal.json", R"([{"id": "system", "elapsed": 1, "overhead_ratio": 1}])");
    dir.write("allocs.json", "[]");
    dir.write("os/proc/sys/kernel/numa_balancing", "0\n");
    const std::string m = quote((dir / "m.json").string());

    const std::vector<std::pair<std::string, std::string>> invocations{
        {"", "--seed 7 --scale desk --format json --topology-fixture " + fixture("uma.json") + " topo"},
        {"topo", "--topology-fixture " + fixture("machine_a.json") + " topo --plan dense --threads 3"},
        {"gen", "gen --dataset zipf --n 100 --c 10 --e 0.3 --w 2 --out " + d},
        {"gen", "gen --dataset join --build-n 10 --probe-n 20 --out " + d},
        {"run", "run --matrix " + m + " --out " + d + "/r --workload W2 --threads 1 --placement none"
                " --mempolicy firsttouch --allocator system --repetitions 2"},
        {"microbench", "microbench --threads 1 --ops 100 --live-cap 4 --placement dense"},
        {"advise", "advise --allocators " + quote((dir / "allocs.json").string()) + " --calibration " +
                       quote((dir / "cal.json").string()) + " --hint light --cap 1.5 --threads 1 --os-root " + d +
                       "/os --out " + d + "/adv --privileged-set"},
        {"report", "report --runs " + d + "/r/runs.jsonl --baseline 0"},
    };
    std::map<std::string, std::set<std::string>> used;
    for (const auto& [sub, args] : invocations) {
        CAPTURE(args);
        CHECK(cli(args).status == 0);
        for (const auto& f : flags_in(args)) used[sub].insert(f);
    }
    for (const char* sub : {"", "topo", "gen", "run", "microbench", "advise", "report"}) {
        CAPTURE(sub);
        auto documented = documented_flags(cli(std::string(sub) + " --help").out);
        if (std::string(sub).empty()) {
            for (const auto& f : documented) CHECK(used[""].contains(f));
        } else {
            for (const auto& f : documented)
                if (!used[""].contains(f)) CHECK(used[sub].contains(f));
        }
    }
    CHECK(std::filesystem::exists(dir / "adv/advice.json"));
}
