#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pepeval/extraction.hpp"
#include "pepeval/util.hpp"

namespace pepeval {

/// A program extracted from a code generation, expected to define the fixed
/// entry point solution().
struct PotProgram {
    std::string source;
    std::string origin_trace;

    static constexpr const char* kEntryPoint = "solution";
};

struct PotConfig {
    // {file} is replaced with the wrapper script path; split on spaces.
    std::string interpreter_cmd = "python3 {file}";
    double timeout_s = 10.0;
    double grace_s = 2.0;
    size_t max_output_bytes = 1 << 20;
    std::string scratch_root;                        // empty -> std::filesystem::temp_directory_path()
    std::vector<std::string> env_allowlist = {"PATH"};

    json to_json() const {
        return json{{"interpreter_cmd", interpreter_cmd},
                    {"timeout_s", timeout_s},
                    {"grace_s", grace_s},
                    {"max_output_bytes", max_output_bytes},
                    {"scratch_root", scratch_root},
                    {"env_allowlist", env_allowlist}};
    }
    static PotConfig from_json(const json& j) {
        PotConfig c;
        c.interpreter_cmd = j.value("interpreter_cmd", "python3 {file}");
        c.timeout_s = j.value("timeout_s", 10.0);
        c.grace_s = j.value("grace_s", 2.0);
        c.max_output_bytes = j.value("max_output_bytes", static_cast<size_t>(1 << 20));
        c.scratch_root = j.value("scratch_root", "");
        c.env_allowlist = j.value("env_allowlist", std::vector<std::string>{"PATH"});
        return c;
    }
};

struct ExecResult {
    ExtractedAnswer outcome;
    std::string stdout_text;
    std::string stderr_text;
    double wall_time_s = 0.0;
    int exit_code = 0;
    bool timed_out = false;
};

// Result channel: the wrapper prints the entry point's return value between
// these sentinels on its own line; everything else on stdout is noise.
inline constexpr const char* kPotResultBegin = "<<<POT_RESULT>>>";
inline constexpr const char* kPotResultEnd = "<<<POT_END>>>";

/// Pulls the program out of a generation: first fenced block defining the
/// entry point, else the first fenced block, else the whole text. Returns
/// nullopt when no candidate defines solution().
inline std::optional<PotProgram> extract_code_block(const std::string& generation,
                                                    const std::string& origin_trace = "") {
    std::vector<std::string> fenced;
    size_t pos = 0;
    while (true) {
        size_t open = generation.find("```", pos);
        if (open == std::string::npos) break;
        size_t body = open + 3;
        size_t eol = generation.find('\n', body);
        if (eol == std::string::npos) break;
        // drop a language tag on the fence line ("python", "py", ...)
        std::string tag = trim(generation.substr(body, eol - body));
        bool tag_like = tag.size() <= 12;
        for (char c : tag)
            tag_like = tag_like && (std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-');
        size_t start = tag_like ? eol + 1 : body;
        size_t close = generation.find("```", start);
        if (close == std::string::npos) {
            fenced.push_back(generation.substr(start));
            break;
        }
        fenced.push_back(generation.substr(start, close - start));
        pos = close + 3;
    }
    std::string candidate;
    if (!fenced.empty()) {
        candidate = fenced[0];
        for (const std::string& block : fenced) {
            if (block.find("def solution") != std::string::npos) {
                candidate = block;
                break;
            }
        }
    } else {
        candidate = generation;
    }
    if (candidate.find("def solution") == std::string::npos) return std::nullopt;
    return PotProgram{std::move(candidate), origin_trace};
}

namespace detail {

inline std::vector<std::string> split_command(const std::string& cmd) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : cmd) {
        if (c == ' ') {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline void apply_rlimit(int resource, rlim_t value) {
    struct rlimit rl{value, value};
    setrlimit(resource, &rl);
}

/// Bounded capture that keeps the head and the most recent tail of a
/// stream, so the sentinel-delimited result line survives chatty programs.
struct StreamCapture {
    explicit StreamCapture(size_t cap) : head_cap(cap / 2), tail_cap(cap - cap / 2) {}

    void append(const char* buf, size_t n) {
        size_t take = head.size() < head_cap ? std::min(n, head_cap - head.size()) : 0;
        head.append(buf, take);
        if (take == n) return;
        truncated = true;
        tail.append(buf + take, n - take);
        if (tail.size() > tail_cap) tail.erase(0, tail.size() - tail_cap);
    }

    std::string str() const {
        if (!truncated) return head;
        return head + "\n...[truncated]...\n" + tail;
    }

    std::string head, tail;
    size_t head_cap, tail_cap;
    bool truncated = false;
};

}  // namespace detail

/// Runs the program in an isolated child process: its own process group, a
/// scratch working directory, allowlisted environment, resource limits and a
/// hard wall-clock timeout. The child is killed as a group on timeout.
inline ExecResult execute_solution(const PotProgram& program, const PotConfig& config) {
    ExecResult result;

    const std::string wrapper =
        program.source +
        "\n\nif __name__ == \"__main__\":\n"
        "    import sys\n"
        "    try:\n"
        "        _pot_value = " + std::string(PotProgram::kEntryPoint) + "()\n"
        "    except BaseException:\n"
        "        import traceback\n"
        "        traceback.print_exc()\n"
        "        sys.exit(70)\n"
        "    sys.stdout.write(\"\\n" + std::string(kPotResultBegin) + "\" + repr(_pot_value) + \"" +
        std::string(kPotResultEnd) + "\\n\")\n";

    namespace fs = std::filesystem;
    fs::path root = config.scratch_root.empty() ? fs::temp_directory_path()
                                                : fs::path(config.scratch_root);
    std::error_code ec;
    fs::create_directories(root, ec);
    char tmpl[4096];
    std::snprintf(tmpl, sizeof(tmpl), "%s/pot-XXXXXX", root.c_str());
    if (!mkdtemp(tmpl)) {
        result.outcome = ExtractedAnswer::unsolved(UnsolvedReason::exec_error);
        result.stderr_text = std::string("mkdtemp failed: ") + std::strerror(errno);
        return result;
    }
    fs::path scratch(tmpl);
    fs::path script = scratch / "program.py";
    write_file(script, wrapper);

    std::vector<std::string> argv_s = detail::split_command(config.interpreter_cmd);
    bool file_placed = false;
    for (std::string& a : argv_s) {
        if (a.find("{file}") != std::string::npos) {
            a = replace_all(a, "{file}", script.string());
            file_placed = true;
        }
    }
    if (!file_placed) argv_s.push_back(script.string());

    int out_pipe[2], err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
        result.outcome = ExtractedAnswer::unsolved(UnsolvedReason::exec_error);
        result.stderr_text = "pipe failed";
        fs::remove_all(scratch, ec);
        return result;
    }

    const auto t0 = std::chrono::steady_clock::now();
    pid_t pid = fork();
    if (pid < 0) {
        result.outcome = ExtractedAnswer::unsolved(UnsolvedReason::exec_error);
        result.stderr_text = "fork failed";
        for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close(fd);
        fs::remove_all(scratch, ec);
        return result;
    }

    if (pid == 0) {
        setsid();  // own process group so the whole tree can be killed
        close(out_pipe[0]);
        close(err_pipe[0]);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[1]);
        close(err_pipe[1]);
        int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) {
            dup2(devnull, STDIN_FILENO);
            close(devnull);
        }
        detail::apply_rlimit(RLIMIT_CPU, static_cast<rlim_t>(config.timeout_s) + 2);
        detail::apply_rlimit(RLIMIT_AS, 512ull * 1024 * 1024);
        detail::apply_rlimit(RLIMIT_FSIZE, 8ull * 1024 * 1024);
        detail::apply_rlimit(RLIMIT_NPROC, 32);
        detail::apply_rlimit(RLIMIT_NOFILE, 64);
        if (chdir(tmpl) != 0) _exit(126);

        // allowlisted environment only
        std::vector<std::string> env_s;
        for (const std::string& name : config.env_allowlist) {
            if (const char* v = getenv(name.c_str())) env_s.push_back(name + "=" + v);
        }
        env_s.push_back("PYTHONDONTWRITEBYTECODE=1");
        env_s.push_back(std::string("HOME=") + tmpl);
        bool has_path = false;
        for (const auto& e : env_s) has_path |= starts_with(e, "PATH=");
        if (!has_path) env_s.push_back("PATH=/usr/local/bin:/usr/bin:/bin");
        std::vector<char*> envp;
        for (auto& e : env_s) envp.push_back(e.data());
        envp.push_back(nullptr);
        std::vector<char*> argv;
        for (auto& a : argv_s) argv.push_back(a.data());
        argv.push_back(nullptr);
        execvpe(argv[0], argv.data(), envp.data());
        _exit(127);
    }

    close(out_pipe[1]);
    close(err_pipe[1]);
    fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
    fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

    const auto deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double>(config.timeout_s));
    bool exited = false;
    int status = 0;
    bool out_open = true, err_open = true;
    detail::StreamCapture out_capture(config.max_output_bytes);
    detail::StreamCapture err_capture(config.max_output_bytes);

    auto drain = [](int fd, detail::StreamCapture& sink, bool& open_flag) {
        char buf[8192];
        while (true) {
            ssize_t n = read(fd, buf, sizeof(buf));
            if (n > 0) {
                sink.append(buf, static_cast<size_t>(n));
            } else if (n == 0) {
                open_flag = false;
                return;
            } else {
                return;  // EAGAIN or error; poll again
            }
        }
    };

    while (true) {
        pid_t w = waitpid(pid, &status, WNOHANG);
        if (w == pid) {
            exited = true;
            break;
        }
        if (std::chrono::steady_clock::now() >= deadline) break;
        struct pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
        poll(fds, 2, 50);
        if (out_open) drain(out_pipe[0], out_capture, out_open);
        if (err_open) drain(err_pipe[0], err_capture, err_open);
    }

    if (!exited) {
        kill(-pid, SIGKILL);  // the whole group
        kill(pid, SIGKILL);
        waitpid(pid, &status, 0);
        result.timed_out = true;
    }
    // final drain after exit
    if (out_open) drain(out_pipe[0], out_capture, out_open);
    if (err_open) drain(err_pipe[0], err_capture, err_open);
    close(out_pipe[0]);
    close(err_pipe[0]);
    result.stdout_text = out_capture.str();
    result.stderr_text = err_capture.str();

    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    fs::remove_all(scratch, ec);

    if (result.timed_out) {
        result.outcome = ExtractedAnswer::unsolved(UnsolvedReason::timeout);
        return result;
    }
    if (result.exit_code != 0) {
        result.outcome = ExtractedAnswer::unsolved(UnsolvedReason::exec_error);
        return result;
    }

    // pull the sentinel-delimited value; stdout noise outside it is ignored
    const std::string& out = result.stdout_text;
    size_t begin = out.rfind(kPotResultBegin);
    std::string value;
    if (begin != std::string::npos) {
        size_t vstart = begin + std::strlen(kPotResultBegin);
        size_t end = out.find(kPotResultEnd, vstart);
        if (end != std::string::npos) value = out.substr(vstart, end - vstart);
    }
    std::string trimmed = trim(value);
    if (trimmed.size() >= 2 && (trimmed.front() == '\'' || trimmed.front() == '"') &&
        trimmed.back() == trimmed.front())
        trimmed = trimmed.substr(1, trimmed.size() - 2);  // repr of a string return

    if (trimmed == "None" || trimmed.empty()) {
        // fall back to the last number the program printed itself
        std::string noise = begin != std::string::npos ? out.substr(0, begin) : out;
        if (auto tok = detail::find_last_number(noise)) {
            if (auto v = normalize_numeric(noise.substr(tok->begin, tok->end - tok->begin))) {
                result.outcome = ExtractedAnswer::numeric(*v);
                return result;
            }
        }
        result.outcome = ExtractedAnswer::unsolved(UnsolvedReason::parse_failed);
        return result;
    }
    if (auto v = normalize_numeric(trimmed)) {
        result.outcome = ExtractedAnswer::numeric(*v);
    } else {
        result.outcome = ExtractedAnswer::unsolved(UnsolvedReason::parse_failed);
    }
    return result;
}

}  // namespace pepeval
