#include <set>

#include "doctest.h"
#include "numabench/error.hpp"
#include "numabench/topology.hpp"
#include "test_support.hpp"

using namespace numabench;
using testing::TempDir;

TEST_CASE("fixtures round-trip byte for byte") {
    for (const char* name : {"machine_a.json", "machine_b.json", "machine_c.json", "uma.json"}) {
        CAPTURE(name);
        const auto text = testing::read_file(testing::fixture(name));
        const Topology t = Topology::deserialize(text);
        CHECK(t.serialize() == text);
        CHECK(Topology::deserialize(t.serialize()) == t);
    }
}

TEST_CASE("machine A layout") {
    const Topology a = Topology::load_fixture(testing::fixture("machine_a.json"));
    CHECK(a.node_count() == 8);
    CHECK(a.cpu_count() == 16);
    CHECK(a.node_of_cpu(15) == 7);
    CHECK(a.node_of_cpu(0) == 0);
    double worst = 0;
    for (int i = 0; i < 8; ++i) {
        CHECK(a.distance(i, i) == 1.0);
        for (int j = 0; j < 8; ++j) {
            CHECK(a.distance(i, j) == a.distance(j, i));
            worst = std::max(worst, a.distance(i, j));
        }
    }
    CHECK(worst == doctest::Approx(1.6));
    CHECK(a.siblings_of(3) == std::vector<int>{3});
    CHECK(a.cores_of(2) == std::vector<std::vector<int>>{{4}, {5}});
}

TEST_CASE("SMT siblings group into cores") {
    const Topology b = Topology::load_fixture(testing::fixture("machine_b.json"));
    CHECK(b.siblings_of(0) == std::vector<int>{0, 2});
    CHECK(b.siblings_of(7) == std::vector<int>{5, 7});
    CHECK(b.cores_of(1) == std::vector<std::vector<int>>{{4, 6}, {5, 7}});
}

TEST_CASE("lookups outside the topology throw") {
    const Topology c = Topology::load_fixture(testing::fixture("machine_c.json"));
    CHECK_THROWS_AS(c.distance(0, 4), std::out_of_range);
    CHECK_THROWS_AS(c.distance(-1, 0), std::out_of_range);
    CHECK_THROWS_AS(c.node_of_cpu(16), std::out_of_range);
    CHECK(c.distance(1, 2) == doctest::Approx(2.1));
}

TEST_CASE("constructor rejects inconsistent layouts") {
    const std::vector<std::vector<double>> d2{{1.0, 2.0}, {2.0, 1.0}};
    SUBCASE("non-contiguous ids") {
        CHECK_THROWS_AS(Topology({{0, {0}, 0}, {2, {1}, 0}}, d2), DiscoveryError);
    }
    SUBCASE("cpu on two nodes") {
        CHECK_THROWS_AS(Topology({{0, {0, 1}, 0}, {1, {1}, 0}}, d2), DiscoveryError);
    }
    SUBCASE("asymmetric distances") {
        CHECK_THROWS_AS(Topology({{0, {0}, 0}, {1, {1}, 0}}, {{1.0, 2.0}, {1.5, 1.0}}), DiscoveryError);
    }
    SUBCASE("local not the row minimum") {
        CHECK_THROWS_AS(Topology({{0, {0}, 0}, {1, {1}, 0}}, {{1.0, 0.5}, {0.5, 1.0}}), DiscoveryError);
    }
    SUBCASE("wrong matrix shape") {
        CHECK_THROWS_AS(Topology({{0, {0}, 0}, {1, {1}, 0}}, {{1.0}}), DiscoveryError);
    }
    SUBCASE("siblings spanning nodes") {
        CHECK_THROWS_AS(Topology({{0, {0}, 0}, {1, {1}, 0}}, d2, {{0, {0, 1}}, {1, {0, 1}}}), DiscoveryError);
    }
    SUBCASE("malformed fixture text") {
        CHECK_THROWS_AS(Topology::deserialize("{\"nodes\": 3}"), DiscoveryError);
    }
}

TEST_CASE("uniform topology") {
    const Topology u = Topology::uniform({0, 1, 2});
    CHECK(u.node_count() == 1);
    CHECK(u.distances() == std::vector<std::vector<double>>{{1.0}});
    CHECK(u.all_cpus() == std::vector<int>{0, 1, 2});
}

TEST_CASE("cpulist syntax") {
    CHECK(parse_cpulist("0-3,8,10-11\n") == std::vector<int>{0, 1, 2, 3, 8, 10, 11});
    CHECK(parse_cpulist("") == std::vector<int>{});
    CHECK(parse_cpulist("5") == std::vector<int>{5});
    CHECK_THROWS_AS(parse_cpulist("3-1"), DiscoveryError);
    CHECK_THROWS_AS(parse_cpulist("a"), DiscoveryError);
}

TEST_CASE("discovery from a sysfs tree") {
    TempDir root;
    root.write("node/node0/cpulist", "0-1,4-5\n");
    root.write("node/node1/cpulist", "2-3,6-7\n");
    root.write("node/node0/distance", "10 21\n");
    root.write("node/node1/distance", "21 10\n");
    root.write("node/node0/meminfo", "Node 0 MemTotal:       2048 kB\nNode 0 MemFree: 1 kB\n");
    root.write("node/node1/meminfo", "Node 1 MemTotal:       4096 kB\n");
    root.write("node/possible", "0-1\n");  // not a node directory
    for (int c = 0; c < 8; ++c) {
        const int sib = c < 4 ? c + 4 : c - 4;
        const int lo = std::min(c, sib), hi = std::max(c, sib);
        root.write("cpu/cpu" + std::to_string(c) + "/topology/thread_siblings_list",
                   std::to_string(lo) + "," + std::to_string(hi) + "\n");
    }
    const Topology t = discover({root.path(), false});
    CHECK(t.node_count() == 2);
    CHECK(t.nodes()[0].cpus == std::vector<int>{0, 1, 4, 5});
    CHECK(t.nodes()[1].mem_total == 4096u * 1024u);
    CHECK(t.distance(0, 1) == doctest::Approx(2.1));
    CHECK(t.distance(1, 1) == 1.0);
    CHECK(t.siblings_of(1) == std::vector<int>{1, 5});
}

TEST_CASE("discovery without node directories falls back to one node") {
    TempDir root;
    root.write("cpu/online", "0-2\n");
    const Topology t = discover({root.path(), false});
    CHECK(t.node_count() == 1);
    CHECK(t.all_cpus() == std::vector<int>{0, 1, 2});
}

TEST_CASE("discovery with nothing readable fails") {
    TempDir root;
    CHECK_THROWS_AS(discover({root.path(), false}), DiscoveryError);
}

TEST_CASE("host discovery is usable") {
    const Topology t = discover();
    CHECK(t.node_count() >= 1);
    CHECK(t.cpu_count() >= 1);
    std::set<int> cpus;
    for (const auto& n : t.nodes()) cpus.insert(n.cpus.begin(), n.cpus.end());
    CHECK(cpus.size() == t.cpu_count());
}
