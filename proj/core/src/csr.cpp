#include "memgauge/csr.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "json_util.hpp"

namespace memgauge {

std::vector<TransformCandidate> candidates(const Sample& sample) {
    std::vector<std::pair<std::size_t, const std::string*>> order; // (first occurrence, name)
    for (const auto& [name, indices] : sample.variables) {
        if (!indices.empty()) order.emplace_back(indices.front(), &name);
    }
    std::sort(order.begin(), order.end());

    const std::unordered_set<std::string> taken(sample.tokens.begin(), sample.tokens.end());
    std::vector<TransformCandidate> out;
    out.reserve(order.size());
    std::size_t counter = 1;
    for (const auto& [first, name] : order) {
        std::string fresh;
        do {
            fresh = "var" + std::to_string(counter++);
        } while (taken.contains(fresh));
        TransformCandidate candidate;
        candidate.origin_id = sample.id;
        candidate.variable = *name;
        candidate.fresh_name = fresh;
        candidate.tokens = sample.tokens;
        for (std::size_t idx : sample.variables.at(*name)) candidate.tokens[idx] = fresh;
        out.push_back(std::move(candidate));
    }
    return out;
}

CriticalProbe is_critical(const Sample& sample, const ModelOracle& oracle,
                          std::size_t query_budget) {
    CriticalProbe probe;
    const auto variants = candidates(sample);
    if (variants.empty()) return probe;

    std::string base;
    try {
        base = oracle(sample.tokens);
        ++probe.queries;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::OracleFailure, "base query for '" + sample.id + "': " + e.what());
    }

    std::size_t budget = query_budget;
    for (const auto& candidate : variants) {
        if (budget == 0) break;
        --budget;
        std::string prediction;
        try {
            prediction = oracle(candidate.tokens);
            ++probe.queries;
        } catch (const Error& e) {
            throw Error(ErrorKind::OracleFailure,
                        "candidate " + candidate.origin_id + "/" + candidate.fresh_name + ": " +
                            e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorKind::OracleFailure,
                        "candidate " + candidate.origin_id + "/" + candidate.fresh_name + ": " +
                            e.what());
        }
        if (prediction != base) {
            probe.critical = true;
            break;
        }
    }
    return probe;
}

CsrReport csr(const Corpus& test_set, const ModelOracle& oracle, const CsrOptions& options) {
    if (test_set.samples.empty()) throw Error(ErrorKind::EmptyTestSet, "CSR over an empty test set");

    const std::size_t n = test_set.samples.size();
    std::vector<char> critical(n, 0);
    std::vector<std::size_t> queries(n, 0);

    const unsigned workers = std::max(1u, options.workers);
    std::atomic<std::size_t> cursor{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto work = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= n) return;
            try {
                const CriticalProbe probe =
                    is_critical(test_set.samples[i], oracle, options.query_budget);
                critical[i] = probe.critical ? 1 : 0;
                queries[i] = probe.queries;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                cursor.store(n);
                return;
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    CsrReport report;
    report.test_size = n;
    for (std::size_t i = 0; i < n; ++i) {
        report.queries += queries[i];
        if (critical[i]) report.critical_ids.push_back(test_set.samples[i].id);
    }
    std::sort(report.critical_ids.begin(), report.critical_ids.end());
    report.ratio = static_cast<double>(report.critical_ids.size()) / static_cast<double>(n);
    return report;
}

// ---------------------------------------------------------------------------
// subprocess oracle

struct SubprocessOracle::Impl {
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;
    int timeout_ms = 30000;
    std::string buffer;
    std::mutex mutex;

    ~Impl() {
        if (to_child >= 0) ::close(to_child);
        if (from_child >= 0) ::close(from_child);
        if (pid > 0) {
            ::kill(pid, SIGTERM);
            int status = 0;
            ::waitpid(pid, &status, 0);
        }
    }
};

SubprocessOracle::SubprocessOracle(const std::string& command, int timeout_seconds)
    : impl_(std::make_unique<Impl>()) {
    // a dead child must surface as EPIPE on write, not kill the process
    static const int sigpipe_ignored = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return 0;
    }();
    (void)sigpipe_ignored;
    impl_->timeout_ms = timeout_seconds * 1000;
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
        throw Error(ErrorKind::OracleFailure, std::string("pipe: ") + std::strerror(errno));
    const pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorKind::OracleFailure, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    impl_->pid = pid;
    impl_->to_child = in_pipe[1];
    impl_->from_child = out_pipe[0];
}

SubprocessOracle::~SubprocessOracle() = default;

std::string SubprocessOracle::predict(const std::vector<std::string>& tokens) {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    static std::atomic<std::uint64_t> query_counter{0};
    const std::string id = "q" + std::to_string(query_counter.fetch_add(1));

    std::string request = "{\"id\":";
    detail::append_json_string(request, id);
    request += ",\"tokens\":";
    detail::append_json_string_array(request, tokens);
    request += "}\n";

    std::size_t written = 0;
    while (written < request.size()) {
        const ssize_t n =
            ::write(impl_->to_child, request.data() + written, request.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorKind::OracleFailure, std::string("write: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }

    // Responses may arrive out of order; match by id.
    for (;;) {
        auto newline = impl_->buffer.find('\n');
        while (newline == std::string::npos) {
            struct pollfd pfd {
                impl_->from_child, POLLIN, 0
            };
            const int ready = ::poll(&pfd, 1, impl_->timeout_ms);
            if (ready == 0)
                throw Error(ErrorKind::OracleFailure, "oracle timed out on query " + id);
            if (ready < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorKind::OracleFailure, std::string("poll: ") + std::strerror(errno));
            }
            char chunk[4096];
            const ssize_t n = ::read(impl_->from_child, chunk, sizeof(chunk));
            if (n == 0) throw Error(ErrorKind::OracleFailure, "oracle closed its output stream");
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorKind::OracleFailure, std::string("read: ") + std::strerror(errno));
            }
            impl_->buffer.append(chunk, static_cast<std::size_t>(n));
            newline = impl_->buffer.find('\n');
        }
        const std::string line = impl_->buffer.substr(0, newline);
        impl_->buffer.erase(0, newline + 1);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw Error(ErrorKind::OracleFailure, std::string("bad oracle response: ") + e.what());
        }
        if (!j.contains("id") || !j.contains("prediction"))
            throw Error(ErrorKind::OracleFailure, "oracle response missing id/prediction");
        if (j["id"].get<std::string>() != id) continue; // response to another query
        return j["prediction"].get<std::string>();
    }
}

ModelOracle SubprocessOracle::as_oracle() {
    return [this](const std::vector<std::string>& tokens) { return predict(tokens); };
}

OraclePool::OraclePool(const std::string& command, unsigned workers, int timeout_seconds)
    : next_(std::make_shared<std::atomic<std::size_t>>(0)) {
    workers_.reserve(std::max(1u, workers));
    for (unsigned w = 0; w < std::max(1u, workers); ++w)
        workers_.push_back(std::make_shared<SubprocessOracle>(command, timeout_seconds));
}

ModelOracle OraclePool::as_oracle() {
    auto workers = workers_;
    auto next = next_;
    return [workers, next](const std::vector<std::string>& tokens) {
        const std::size_t i = next->fetch_add(1) % workers.size();
        return workers[i]->predict(tokens);
    };
}

} // namespace memgauge
