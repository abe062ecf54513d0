#include "numabench/runner.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>
#include <utility>

#include "numabench/error.hpp"
#include "numabench/proc_stats.hpp"
#include "numabench/rng.hpp"

extern char** environ;

namespace numabench {

namespace fs = std::filesystem;
using nlohmann::json;

Scale parse_scale(const std::string& text) {
    if (text == "desk") return Scale::Desk;
    if (text == "paper") return Scale::Paper;
    throw ConfigError("unknown scale '" + text + "' (expected desk or paper)");
}

void ExperimentConfig::validate() const {
    if (threads == 0) throw ConfigError("threads must be >= 1");
    if (repetitions < 2) throw ConfigError("repetitions must be >= 2 (one cold run plus at least one measured run)");
    if (!allocator.is_default()) {
        std::error_code ec;
        if (!fs::exists(allocator.path, ec))
            throw ConfigError("allocator '" + allocator.id + "' object not found: " + allocator.path);
    }
    switch (workload) {
    case Workload::W1:
    case Workload::W2: agg.validate(); break;
    case Workload::W3:
    case Workload::W4: join.validate(); break;
    case Workload::Microbench: {
        MicrobenchConfig mb = microbench;
        mb.threads = threads;
        mb.validate();
        break;
    }
    }
}

std::string ExperimentConfig::dataset_label() const {
    switch (workload) {
    case Workload::W1:
    case Workload::W2: return to_string(agg.distribution);
    case Workload::W3:
    case Workload::W4: return "join";
    case Workload::Microbench: return "microbench";
    }
    return "?";
}

json to_json(const ExperimentConfig& c) {
    return {
        {"workload", to_string(c.workload)},
        {"agg",
         {{"distribution", to_string(c.agg.distribution)},
          {"n", c.agg.n},
          {"c", c.agg.c},
          {"e", c.agg.e},
          {"w", c.agg.w},
          {"seed", c.agg.seed}}},
        {"join", {{"build_n", c.join.build_n}, {"probe_n", c.join.probe_n}, {"seed", c.join.seed}}},
        {"microbench",
         {{"ops_per_thread", c.microbench.ops_per_thread},
          {"size_classes", c.microbench.size_classes},
          {"live_cap", c.microbench.live_cap},
          {"seed", c.microbench.seed}}},
        {"threads", c.threads},
        {"placement", to_string(c.placement)},
        {"mempolicy", to_string(c.mempolicy)},
        {"allocator", {{"id", c.allocator.id}, {"path", c.allocator.path}}},
        {"repetitions", c.repetitions},
        {"seed", c.seed},
    };
}

ExperimentConfig config_from_json(const json& j) {
    try {
        ExperimentConfig c;
        c.workload = parse_workload(j.at("workload").get<std::string>());
        const auto& a = j.at("agg");
        c.agg.distribution = parse_distribution(a.at("distribution").get<std::string>());
        c.agg.n = a.at("n").get<std::uint64_t>();
        c.agg.c = a.at("c").get<std::uint64_t>();
        c.agg.e = a.at("e").get<double>();
        c.agg.w = a.at("w").get<std::uint64_t>();
        c.agg.seed = a.at("seed").get<std::uint64_t>();
        const auto& jn = j.at("join");
        c.join = {jn.at("build_n").get<std::uint64_t>(), jn.at("probe_n").get<std::uint64_t>(),
                  jn.at("seed").get<std::uint64_t>()};
        const auto& mb = j.at("microbench");
        c.microbench.ops_per_thread = mb.at("ops_per_thread").get<std::uint64_t>();
        c.microbench.size_classes = mb.at("size_classes").get<std::vector<std::size_t>>();
        c.microbench.live_cap = mb.at("live_cap").get<std::size_t>();
        c.microbench.seed = mb.at("seed").get<std::uint64_t>();
        c.threads = j.at("threads").get<std::size_t>();
        c.microbench.threads = c.threads;
        c.placement = parse_strategy(j.at("placement").get<std::string>());
        c.mempolicy = parse_mempolicy(j.at("mempolicy").get<std::string>());
        c.allocator = {j.at("allocator").at("id").get<std::string>(), j.at("allocator").at("path").get<std::string>()};
        c.repetitions = j.at("repetitions").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
}

namespace {

template <typename T, typename Parse>
void read_dimension(const json& j, const char* key, std::vector<T>& into, Parse parse) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw ConfigError(std::string("matrix dimension '") + key + "' must be an array");
    if (arr.empty()) throw ConfigError(std::string("matrix dimension '") + key + "' is empty");
    into.clear();
    for (const auto& v : arr) into.push_back(parse(v));
}

void reject_unknown(const json& j, const char* what, std::initializer_list<std::string_view> known) {
    if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown " + std::string(what) + " key '" + key + "'");
}

}  // namespace

MatrixSpec MatrixSpec::from_json(const json& j, Scale scale, std::size_t default_threads) {
    MatrixSpec m;
    m.threads = {std::max<std::size_t>(default_threads, 1)};
    if (scale == Scale::Paper) {
        m.agg = AggDatasetSpec::paper_scale(Distribution::MovingCluster);
        m.join = JoinDatasetSpec::paper_scale();
        m.microbench = MicrobenchConfig::paper_scale();
    } else {
        m.join = JoinDatasetSpec::with_ratio(1'000'000);
    }
    try {
        reject_unknown(j, "matrix",
                       {"workloads", "distributions", "threads", "placements", "policies", "allocators", "repetitions",
                        "seed", "dataset", "microbench"});
        if (j.contains("dataset")) reject_unknown(j["dataset"], "dataset", {"n", "c", "e", "w", "build_n", "probe_n"});
        if (j.contains("microbench"))
            reject_unknown(j["microbench"], "microbench", {"ops_per_thread", "live_cap", "size_classes"});
        read_dimension(j, "workloads", m.workloads, [](const json& v) { return parse_workload(v.get<std::string>()); });
        read_dimension(j, "distributions", m.distributions,
                       [](const json& v) { return parse_distribution(v.get<std::string>()); });
        read_dimension(j, "threads", m.threads, [](const json& v) {
            const auto t = v.get<std::size_t>();
            if (t == 0) throw ConfigError("thread counts must be >= 1");
            return t;
        });
        read_dimension(j, "placements", m.placements, [](const json& v) { return parse_strategy(v.get<std::string>()); });
        read_dimension(j, "policies", m.policies, [](const json& v) { return parse_mempolicy(v.get<std::string>()); });
        read_dimension(j, "allocators", m.allocators, [](const json& v) {
            if (v.is_string()) {
                const auto s = v.get<std::string>();
                if (s == "system") return AllocatorSpec{};
                return AllocatorSpec{fs::path(s).stem().string(), s};
            }
            AllocatorSpec a{v.at("id").get<std::string>(), v.value("path", std::string{})};
            if (a.id == "system") a.path.clear();
            return a;
        });
        m.repetitions = j.value("repetitions", m.repetitions);
        m.seed = j.value("seed", m.seed);
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            m.agg.n = d.value("n", m.agg.n);
            m.agg.c = d.value("c", m.agg.c);
            m.agg.e = d.value("e", m.agg.e);
            // An unset window shrinks to fit a small key space.
            m.agg.w = d.contains("w") ? d["w"].get<std::uint64_t>() : std::min(m.agg.w, m.agg.c);
            if (d.contains("build_n")) {
                m.join.build_n = d["build_n"].get<std::uint64_t>();
                m.join.probe_n = 16 * m.join.build_n;
            }
            m.join.probe_n = d.value("probe_n", m.join.probe_n);
        }
        if (j.contains("microbench")) {
            const auto& mb = j["microbench"];
            m.microbench.ops_per_thread = mb.value("ops_per_thread", m.microbench.ops_per_thread);
            m.microbench.live_cap = mb.value("live_cap", m.microbench.live_cap);
            if (mb.contains("size_classes"))
                m.microbench.size_classes = mb["size_classes"].get<std::vector<std::size_t>>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed matrix: ") + e.what());
    }
    return m;
}

std::vector<ExperimentConfig> expand_matrix(const MatrixSpec& spec) {
    auto require = [](bool ok, const char* dim) {
        if (!ok) throw ConfigError(std::string("matrix dimension '") + dim + "' is empty");
    };
    require(!spec.workloads.empty(), "workloads");
    require(!spec.distributions.empty(), "distributions");
    require(!spec.threads.empty(), "threads");
    require(!spec.placements.empty(), "placements");
    require(!spec.policies.empty(), "policies");
    require(!spec.allocators.empty(), "allocators");

    std::vector<ExperimentConfig> out;
    for (Workload w : spec.workloads) {
        const bool aggregation = w == Workload::W1 || w == Workload::W2;
        const std::size_t dists = aggregation ? spec.distributions.size() : 1;
        for (std::size_t d = 0; d < dists; ++d)
            for (std::size_t t : spec.threads)
                for (Strategy s : spec.placements)
                    for (const MemPolicy& p : spec.policies)
                        for (const AllocatorSpec& a : spec.allocators) {
                            ExperimentConfig c;
                            c.workload = w;
                            c.agg = spec.agg;
                            c.agg.distribution = spec.distributions[d];
                            c.agg.seed = spec.seed;
                            c.join = spec.join;
                            c.join.seed = spec.seed;
                            c.microbench = spec.microbench;
                            c.microbench.seed = spec.seed;
                            c.microbench.threads = t;
                            c.threads = t;
                            c.placement = s;
                            c.mempolicy = p;
                            c.allocator = a;
                            c.repetitions = spec.repetitions;
                            c.seed = spec.seed;
                            out.push_back(std::move(c));
                        }
    }
    return out;
}

Summary summarize_reps(std::span<const double> elapsed) {
    if (elapsed.size() < 2) throw ConfigError("need at least one measured repetition after the cold run");
    const auto measured = elapsed.subspan(1);
    Summary s;
    s.count = measured.size();
    s.min = *std::min_element(measured.begin(), measured.end());
    s.max = *std::max_element(measured.begin(), measured.end());
    double total = 0.0;
    for (double v : measured) total += v;
    s.mean = total / static_cast<double>(measured.size());
    return s;
}

std::string to_string(LocalitySource s) { return s == LocalitySource::Counters ? "counters" : "page-proxy"; }

std::optional<double> page_locality(const std::map<int, std::uint64_t>& node_kib, const std::set<int>& bound_nodes) {
    std::uint64_t total = 0, local = 0;
    for (const auto& [node, kib] : node_kib) {
        total += kib;
        if (bound_nodes.contains(node)) local += kib;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(local) / static_cast<double>(total);
}

std::optional<Locality> measure_locality(pid_t pid, const std::set<int>& bound_nodes,
                                         std::optional<double> counter_lar) {
    if (counter_lar) return Locality{*counter_lar, LocalitySource::Counters};
    auto maps = proc::numa_maps(pid);
    if (!maps) return std::nullopt;
    auto ratio = page_locality(parse_numa_maps(*maps), bound_nodes);
    if (!ratio) return std::nullopt;
    return Locality{*ratio, LocalitySource::PageProxy};
}

namespace {

json locality_json(const std::optional<Locality>& l) {
    if (!l) return nullptr;
    return {{"value", l->value}, {"source", to_string(l->source)}};
}

std::optional<Locality> locality_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return Locality{j.at("value").get<double>(), j.at("source").get<std::string>() == "counters"
                                                     ? LocalitySource::Counters
                                                     : LocalitySource::PageProxy};
}

template <typename T>
json opt_json(const std::optional<T>& v) {
    if (!v) return nullptr;
    return *v;
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

json to_json(const RunResult& r) {
    json reps = json::array();
    for (const auto& rep : r.reps)
        reps.push_back({{"elapsed", rep.elapsed},
                        {"peak_rss", rep.peak_rss},
                        {"locality", locality_json(rep.locality)},
                        {"migrations", opt_json(rep.migrations)},
                        {"cache_misses", opt_json(rep.cache_misses)},
                        {"detail", rep.detail}});
    return {{"schema", kRunSchema},
            {"rng", Rng::kAlgorithm},
            {"config", to_json(r.config)},
            {"os_config", {{"thp", to_string(r.os.thp)}, {"numa_balancing", to_string(r.os.numa_balancing)}}},
            {"reps", reps},
            {"summary", {{"mean", r.summary.mean}, {"min", r.summary.min}, {"max", r.summary.max}, {"count", r.summary.count}}},
            {"peak_rss", r.peak_rss},
            {"locality", locality_json(r.locality)},
            {"migrations", opt_json(r.migrations)},
            {"mempolicy_fell_back", r.mempolicy_fell_back},
            {"oversubscribed", r.oversubscribed},
            {"warnings", r.warnings}};
}

RunResult run_from_json(const json& j) {
    try {
        if (j.value("schema", std::string{}) != kRunSchema)
            throw ConfigError("unsupported run schema '" + j.value("schema", std::string{}) + "'");
        RunResult r;
        r.config = config_from_json(j.at("config"));
        r.os.thp = parse_thp_mode(j.at("os_config").at("thp").get<std::string>());
        r.os.numa_balancing = parse_balancing_mode(j.at("os_config").at("numa_balancing").get<std::string>());
        for (const auto& jr : j.at("reps")) {
            RepResult rep;
            rep.elapsed = jr.at("elapsed").get<double>();
            rep.peak_rss = jr.at("peak_rss").get<std::uint64_t>();
            rep.locality = locality_from_json(jr.at("locality"));
            rep.migrations = opt_from<std::uint64_t>(jr, "migrations");
            rep.cache_misses = opt_from<std::uint64_t>(jr, "cache_misses");
            rep.detail = jr.value("detail", json::object());
            r.reps.push_back(std::move(rep));
        }
        r.mempolicy_fell_back = j.value("mempolicy_fell_back", false);
        r.oversubscribed = j.value("oversubscribed", false);
        r.warnings = j.value("warnings", std::vector<std::string>{});
        finalize_run(r);
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run record: ") + e.what());
    }
}

void finalize_run(RunResult& r) {
    std::vector<double> elapsed;
    for (const auto& rep : r.reps) elapsed.push_back(rep.elapsed);
    r.summary = summarize_reps(elapsed);
    r.peak_rss = 0;
    double loc_sum = 0.0, mig_sum = 0.0;
    std::size_t loc_n = 0, mig_n = 0;
    std::optional<LocalitySource> source;
    for (std::size_t i = 1; i < r.reps.size(); ++i) {
        const auto& rep = r.reps[i];
        r.peak_rss = std::max(r.peak_rss, rep.peak_rss);
        if (rep.locality) {
            loc_sum += rep.locality->value;
            ++loc_n;
            // A mix of sources is reported as the weaker one.
            if (!source || rep.locality->source == LocalitySource::PageProxy) source = rep.locality->source;
        }
        if (rep.migrations) {
            mig_sum += static_cast<double>(*rep.migrations);
            ++mig_n;
        }
    }
    r.locality = loc_n ? std::optional<Locality>(Locality{loc_sum / static_cast<double>(loc_n), *source}) : std::nullopt;
    r.migrations = mig_n ? std::optional<double>(mig_sum / static_cast<double>(mig_n)) : std::nullopt;
}

fs::path self_executable() {
    std::error_code ec;
    auto p = fs::read_symlink("/proc/self/exe", ec);
    if (ec) throw RunError("cannot resolve /proc/self/exe: " + ec.message());
    return p;
}

std::vector<std::string> child_environment(const AllocatorSpec& allocator, const std::vector<std::string>& base) {
    std::vector<std::string> env;
    for (const auto& e : base)
        if (e.rfind("LD_PRELOAD=", 0) != 0) env.push_back(e);
    if (!allocator.is_default()) env.push_back("LD_PRELOAD=" + allocator.path);
    return env;
}

namespace {

class Fd {
public:
    explicit Fd(int fd = -1) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    int get() const { return fd_; }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_;
};

std::optional<std::string> read_line(int fd, std::string& buffer) {
    for (;;) {
        auto nl = buffer.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            return line;
        }
        char chunk[4096];
        const ssize_t n = ::read(fd, chunk, sizeof(chunk));
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return std::nullopt;
        buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct ChildRep {
    RepResult rep;
    bool fell_back = false;
    bool oversubscribed = false;
    std::optional<std::string> warning;
};

ChildRep run_child(const ExperimentConfig& config, const RunnerOptions& options, std::size_t rep_index) {
    int sv[2];
    if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
        throw RunError(std::string("socketpair failed: ") + std::strerror(errno));
    Fd parent_end(sv[0]), child_end(sv[1]);

    static std::size_t counter = 0;
    const fs::path err_path = options.scratch_dir / ("numabench-cell-" + std::to_string(::getpid()) + "-" +
                                                     std::to_string(counter++) + ".stderr");

    std::vector<std::string> args{options.worker_exe.string(), "cell", "--config-json", to_json(config).dump()};
    if (options.topology_fixture) {
        args.push_back("--topology-fixture");
        args.push_back(options.topology_fixture->string());
    }
    std::vector<std::string> base;
    if (options.base_env) {
        base = *options.base_env;
    } else {
        for (char** e = environ; *e; ++e) base.emplace_back(*e);
    }
    const auto env = child_environment(config.allocator, base);
    std::vector<char*> argv, envp;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    std::vector<std::string> env_store = env;
    for (auto& e : env_store) envp.push_back(e.data());
    envp.push_back(nullptr);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, child_end.get(), 0);
    posix_spawn_file_actions_adddup2(&actions, child_end.get(), 1);
    posix_spawn_file_actions_addopen(&actions, 2, err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    pid_t pid = -1;
    const int rc = posix_spawn(&pid, options.worker_exe.c_str(), &actions, nullptr, argv.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    child_end.reset();
    if (rc != 0) throw RunError("cannot spawn " + options.worker_exe.string() + ": " + std::strerror(rc));

    auto fail = [&](const std::string& what) -> RunError {
        int status = 0;
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        std::string diag = slurp(err_path);
        std::error_code ec;
        fs::remove(err_path, ec);
        return RunError("rep " + std::to_string(rep_index) + " of " + to_string(config.workload) + ": " + what +
                        (diag.empty() ? "" : "\n" + diag));
    };

    std::string buffer;
    auto ready_line = read_line(parent_end.get(), buffer);
    if (!ready_line) {
        int status = 0;
        ::waitpid(pid, &status, 0);
        std::string diag = slurp(err_path);
        std::error_code ec;
        fs::remove(err_path, ec);
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        throw RunError("child exited with status " + std::to_string(code) + " before reporting" +
                       (diag.empty() ? "" : ":\n" + diag));
    }
    ChildRep out;
    json ready;
    try {
        ready = json::parse(*ready_line);
    } catch (const json::exception&) {
        throw fail("unexpected child output: " + *ready_line);
    }
    const auto bound = ready.value("bound_nodes", std::set<int>{});
    const auto& counters = ready.at("counters");
    out.rep.cache_misses = opt_from<std::uint64_t>(counters, "cache_misses");
    out.rep.locality = measure_locality(pid, bound, opt_from<double>(counters, "lar"));
    out.rep.migrations = proc::migrations(pid);

    const char go[] = "go\n";
    if (::send(parent_end.get(), go, sizeof(go) - 1, MSG_NOSIGNAL) < 0) throw fail("child went away during sampling");
    auto done_line = read_line(parent_end.get(), buffer);
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (!done_line || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        std::string diag = slurp(err_path);
        std::error_code ec;
        fs::remove(err_path, ec);
        throw RunError("child failed after the measured phase" + (diag.empty() ? "" : ":\n" + diag));
    }
    std::error_code ec;
    fs::remove(err_path, ec);
    try {
        const json done = json::parse(*done_line);
        out.rep.elapsed = done.at("elapsed").get<double>();
        out.rep.peak_rss = done.at("peak_rss").get<std::uint64_t>();
        out.rep.detail = done.at("detail");
        out.fell_back = done.at("mempolicy").at("fell_back").get<bool>();
        out.oversubscribed = done.at("oversubscribed").get<bool>();
        if (done.contains("warning")) out.warning = done["warning"].get<std::string>();
    } catch (const json::exception& e) {
        throw RunError(std::string("malformed child report: ") + e.what());
    }
    return out;
}

}  // namespace

RunResult execute_run(const ExperimentConfig& config, const RunnerOptions& options) {
    config.validate();
    if (options.worker_exe.empty()) throw ConfigError("runner needs a worker executable");
    RunResult result;
    result.config = config;
    result.os = read_os_config();
    for (std::size_t i = 0; i < config.repetitions; ++i) {
        ChildRep c = run_child(config, options, i);
        result.mempolicy_fell_back = result.mempolicy_fell_back || c.fell_back;
        result.oversubscribed = result.oversubscribed || c.oversubscribed;
        if (c.warning && std::find(result.warnings.begin(), result.warnings.end(), *c.warning) == result.warnings.end())
            result.warnings.push_back(*c.warning);
        result.reps.push_back(std::move(c.rep));
    }
    finalize_run(result);
    return result;
}

std::vector<SummaryRow> summarize(std::span<const RunResult> results, std::size_t baseline) {
    if (results.empty()) throw ConfigError("nothing to summarize");
    if (baseline >= results.size()) throw ConfigError("baseline index out of range");
    const Workload w = results.front().config.workload;
    for (const auto& r : results)
        if (r.config.workload != w) throw ConfigError("cannot summarize results of different workloads together");
    const double base = results[baseline].summary.mean;
    std::vector<SummaryRow> rows;
    for (const auto& r : results) {
        SummaryRow row;
        row.workload = to_string(r.config.workload);
        row.dataset = r.config.dataset_label();
        row.threads = r.config.threads;
        row.allocator = r.config.allocator.id;
        row.mempolicy = to_string(r.config.mempolicy);
        row.placement = to_string(r.config.placement);
        row.elapsed = r.summary;
        row.peak_rss = r.peak_rss;
        row.locality = r.locality;
        row.migrations = r.migrations;
        row.relative = base > 0 ? r.summary.mean / base : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string summary_csv(std::span<const SummaryRow> rows, bool header) {
    std::ostringstream out;
    out << std::setprecision(9);
    if (header)
        out << "workload,dataset,threads,allocator,mempolicy,placement,measured_reps,mean_s,min_s,max_s,"
               "peak_rss_bytes,locality,locality_source,migrations,relative,reduction_pct\n";
    for (const auto& r : rows) {
        out << r.workload << ',' << r.dataset << ',' << r.threads << ',' << r.allocator << ',' << r.mempolicy << ','
            << r.placement << ',' << r.elapsed.count << ',' << r.elapsed.mean << ',' << r.elapsed.min << ','
            << r.elapsed.max << ',' << r.peak_rss << ',';
        if (r.locality)
            out << r.locality->value << ',' << to_string(r.locality->source);
        else
            out << ',';
        out << ',';
        if (r.migrations) out << *r.migrations;
        out << ',' << r.relative << ',' << (1.0 - r.relative) * 100.0 << '\n';
    }
    return out.str();
}

std::string summary_text(std::span<const SummaryRow> rows) {
    std::ostringstream out;
    out << std::left << std::setw(5) << "wl" << std::setw(14) << "dataset" << std::setw(4) << "T" << std::setw(12)
        << "allocator" << std::setw(12) << "mempolicy" << std::setw(8) << "place" << std::right << std::setw(11)
        << "mean[s]" << std::setw(11) << "min[s]" << std::setw(11) << "max[s]" << std::setw(12) << "rss[MiB]"
        << std::setw(9) << "LAR" << std::setw(9) << "rel" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(5) << r.workload << std::setw(14) << r.dataset << std::setw(4) << r.threads
            << std::setw(12) << r.allocator << std::setw(12) << r.mempolicy << std::setw(8) << r.placement
            << std::right << std::fixed << std::setprecision(4) << std::setw(11) << r.elapsed.mean << std::setw(11)
            << r.elapsed.min << std::setw(11) << r.elapsed.max << std::setprecision(1) << std::setw(12)
            << static_cast<double>(r.peak_rss) / (1024.0 * 1024.0) << std::setprecision(3) << std::setw(8);
        if (r.locality)
            out << r.locality->value << (r.locality->source == LocalitySource::PageProxy ? "*" : " ");
        else
            out << "-" << ' ';
        out << std::setw(9) << r.relative << '\n';
        out.unsetf(std::ios::fixed);
    }
    out << "(* = page-placement proxy, not a hardware-counter LAR)\n";
    return out.str();
}

void write_results(const fs::path& dir, std::span<const RunResult> results) {
    fs::create_directories(dir);
    std::ofstream runs(dir / "runs.jsonl", std::ios::trunc);
    for (const auto& r : results) runs << to_json(r).dump() << '\n';
    std::ofstream csv(dir / "summary.csv", std::ios::trunc);
    bool header = true;
    std::vector<Workload> seen;
    for (const auto& r : results) {
        const Workload w = r.config.workload;
        if (std::find(seen.begin(), seen.end(), w) != seen.end()) continue;
        seen.push_back(w);
        std::vector<RunResult> group;
        for (const auto& x : results)
            if (x.config.workload == w) group.push_back(x);
        const auto rows = summarize(group);
        csv << summary_csv(rows, header);
        header = false;
    }
    if (!runs || !csv) throw Error("cannot write results under " + dir.string());
}

std::vector<RunResult> load_runs(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    std::vector<RunResult> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(run_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace numabench
