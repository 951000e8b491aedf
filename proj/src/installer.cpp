#include "davos/installer.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <map>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "davos/error.hpp"
#include "strings.hpp"

extern char** environ;

namespace davos
{
    namespace
    {
        using clock = std::chrono::steady_clock;

        bool is_executable_file(const fs::path& path)
        {
            std::error_code ec;
            return fs::is_regular_file(path, ec) && ::access(path.c_str(), X_OK) == 0;
        }

        std::string shell_quote(std::string_view word)
        {
            const bool plain = !word.empty() && std::all_of(word.begin(), word.end(), [](char c) {
                return detail::is_alnum(c) || std::strchr("-_./=:@+,%[]<>!~", c) != nullptr;
            });
            // Comparison operators would be redirections in a shell.
            if (plain && word.find_first_of("<>!") == std::string_view::npos)
            {
                return std::string(word);
            }
            std::string out = "'";
            for (char c : word)
            {
                if (c == '\'')
                {
                    out += "'\\''";
                }
                else
                {
                    out += c;
                }
            }
            out += '\'';
            return out;
        }

        std::vector<std::string> build_environment(const EnvOverrides& overrides)
        {
            std::map<std::string, std::string> merged;
            std::vector<std::string> order;
            for (char** entry = environ; entry != nullptr && *entry != nullptr; ++entry)
            {
                std::string_view text(*entry);
                const auto eq = text.find('=');
                if (eq == std::string_view::npos)
                {
                    continue;
                }
                std::string key(text.substr(0, eq));
                if (merged.emplace(key, std::string(text.substr(eq + 1))).second)
                {
                    order.push_back(key);
                }
            }
            for (const auto& [key, value] : overrides)
            {
                if (merged.insert_or_assign(key, value).second)
                {
                    order.push_back(key);
                }
            }
            std::vector<std::string> out;
            out.reserve(order.size());
            for (const auto& key : order)
            {
                out.push_back(key + "=" + merged[key]);
            }
            return out;
        }

        struct fd_guard
        {
            int fd = -1;

            ~fd_guard()
            {
                reset();
            }

            void reset()
            {
                if (fd >= 0)
                {
                    ::close(fd);
                    fd = -1;
                }
            }
        };

        [[noreturn]] void throw_not_found(std::string_view program, std::string_view why)
        {
            throw error(errc::installer_not_found, fmt::format("Cannot run '{}': {}", program, why));
        }

        double seconds_since(clock::time_point start)
        {
            return std::chrono::duration<double>(clock::now() - start).count();
        }
    }

    std::string_view to_string(install_status status) noexcept
    {
        switch (status)
        {
            case install_status::ok:
                return "OK";
            case install_status::failed:
                return "FAILED";
            case install_status::declined:
                return "DECLINED";
        }
        return "";
    }

    std::vector<std::string> InstallCommand::full_argv() const
    {
        std::vector<std::string> out = executable;
        out.insert(out.end(), argv.begin(), argv.end());
        return out;
    }

    std::string InstallCommand::display() const
    {
        std::vector<std::string> words;
        for (const auto& word : full_argv())
        {
            words.push_back(shell_quote(word));
        }
        return detail::join(words, " ");
    }

    Console Console::standard(bool output_to_stderr)
    {
        Console console;
        if (output_to_stderr)
        {
            console.out = [](std::string_view text) { std::cerr << text << std::flush; };
        }
        else
        {
            console.out = [](std::string_view text) { std::cout << text << std::flush; };
        }
        console.err = [](std::string_view text) { std::cerr << text << std::flush; };
        console.confirm = [](std::string_view prompt)
        {
            std::cerr << prompt << " [y/n] " << std::flush;
            std::string answer;
            if (!std::getline(std::cin, answer))
            {
                return false;
            }
            answer = detail::to_lower(detail::trim(answer));
            return answer == "y" || answer == "yes";
        };
        return console;
    }

    Console Console::silent()
    {
        return Console{};
    }

    std::vector<std::string> split_executable(std::string_view spec)
    {
        const auto trimmed = detail::trim(spec);
        // "<interpreter> -m pip" is the only multi-word form; anything else
        // is a single path that may well contain spaces.
        const auto marker = trimmed.find(" -m ");
        if (marker == std::string_view::npos)
        {
            return {std::string(trimmed)};
        }
        std::vector<std::string> out{std::string(detail::trim(trimmed.substr(0, marker))), "-m"};
        for (auto word : detail::split_any(trimmed.substr(marker + 4), " \t"))
        {
            if (!word.empty())
            {
                out.emplace_back(word);
            }
        }
        return out;
    }

    std::optional<fs::path> find_on_path(std::string_view program)
    {
        if (program.find('/') != std::string_view::npos)
        {
            return is_executable_file(fs::path(program)) ? std::optional<fs::path>(fs::path(program)) : std::nullopt;
        }
        const char* path = std::getenv("PATH");
        if (path == nullptr)
        {
            return std::nullopt;
        }
        for (auto dir : detail::split_any(path, ":"))
        {
            if (dir.empty())
            {
                continue;
            }
            auto candidate = fs::path(dir) / program;
            if (is_executable_file(candidate))
            {
                return candidate;
            }
        }
        return std::nullopt;
    }

    std::vector<std::string> resolve_pip_executable(const InstallerSettings& settings)
    {
        if (settings.pip_executable && !detail::trim(*settings.pip_executable).empty())
        {
            return split_executable(*settings.pip_executable);
        }
        if (auto interpreter = find_on_path(settings.interpreter))
        {
            const auto sibling = interpreter->parent_path() / "pip";
            if (is_executable_file(sibling))
            {
                return {sibling.string()};
            }
        }
        if (auto pip = find_on_path("pip"))
        {
            return {pip->string()};
        }
        return {settings.interpreter, "-m", "pip"};
    }

    InstallCommand build_command(
        const Requirement& requirement,
        const OnionSpec* onion,
        const std::optional<fs::path>& target_dir,
        const InstallerSettings& settings
    )
    {
        InstallCommand cmd;
        cmd.executable = resolve_pip_executable(settings);
        cmd.target_dir = target_dir;
        cmd.env_overrides = settings.env_overrides;
        cmd.env_overrides.emplace_back("PIP_DISABLE_PIP_VERSION_CHECK", "1");

        cmd.argv.emplace_back("install");
        cmd.argv.push_back(requirement.str());
        bool has_no_input = false;
        if (onion != nullptr)
        {
            for (auto& arg : onion->option_args())
            {
                has_no_input = has_no_input || arg == "--no-input";
                cmd.argv.push_back(std::move(arg));
            }
            has_no_input = has_no_input || onion->no_input();
        }
        if (target_dir)
        {
            cmd.argv.emplace_back("--target");
            cmd.argv.push_back(target_dir->string());
        }
        if (settings.noninteractive && !has_no_input)
        {
            cmd.argv.emplace_back("--no-input");
        }
        if (settings.index.no_index)
        {
            cmd.argv.emplace_back("--no-index");
        }
        if (settings.index.index_url)
        {
            cmd.argv.emplace_back("--index-url");
            cmd.argv.push_back(*settings.index.index_url);
        }
        for (const auto& link : settings.index.find_links)
        {
            cmd.argv.emplace_back("--find-links");
            cmd.argv.push_back(link);
        }
        return cmd;
    }

    bool confirm_install(const InstallCommand& cmd, const InstallerSettings& settings, Console& console)
    {
        // Non-interactive mode turns confirmation off rather than failing.
        if (!settings.confirm_install || settings.noninteractive)
        {
            return true;
        }
        if (!console.confirm)
        {
            return false;
        }
        return console.confirm(fmt::format("Install with: {}?", cmd.display()));
    }

    ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options)
    {
        if (argv.empty() || argv.front().empty())
        {
            throw_not_found("", "no program given");
        }
        const auto program = find_on_path(argv.front());
        if (!program)
        {
            throw_not_found(argv.front(), "not found or not executable");
        }

        int out_pipe[2];
        int err_pipe[2];
        if (::pipe2(out_pipe, O_CLOEXEC) != 0)
        {
            throw error(errc::io_error, fmt::format("pipe: {}", std::strerror(errno)));
        }
        fd_guard out_read{out_pipe[0]};
        fd_guard out_write{out_pipe[1]};
        if (::pipe2(err_pipe, O_CLOEXEC) != 0)
        {
            throw error(errc::io_error, fmt::format("pipe: {}", std::strerror(errno)));
        }
        fd_guard err_read{err_pipe[0]};
        fd_guard err_write{err_pipe[1]};

        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        if (!options.inherit_stdin)
        {
            posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
        }
        posix_spawn_file_actions_adddup2(&actions, out_write.fd, STDOUT_FILENO);
        posix_spawn_file_actions_adddup2(&actions, err_write.fd, STDERR_FILENO);

        std::vector<char*> c_argv;
        for (const auto& arg : argv)
        {
            c_argv.push_back(const_cast<char*>(arg.c_str()));
        }
        c_argv.push_back(nullptr);
        const auto env_strings = build_environment(options.env);
        std::vector<char*> c_env;
        for (const auto& entry : env_strings)
        {
            c_env.push_back(const_cast<char*>(entry.c_str()));
        }
        c_env.push_back(nullptr);

        const auto start = clock::now();
        pid_t pid = -1;
        const int rc = ::posix_spawn(&pid, program->c_str(), &actions, nullptr, c_argv.data(), c_env.data());
        posix_spawn_file_actions_destroy(&actions);
        if (rc != 0)
        {
            throw_not_found(argv.front(), std::strerror(rc));
        }
        out_write.reset();
        err_write.reset();

        ProcessResult result;
        pollfd fds[2] = {{out_read.fd, POLLIN, 0}, {err_read.fd, POLLIN, 0}};
        int open_streams = 2;
        char buffer[8192];
        while (open_streams > 0)
        {
            int wait_ms = -1;
            if (options.timeout_seconds)
            {
                const double left = *options.timeout_seconds - seconds_since(start);
                if (left <= 0)
                {
                    ::kill(pid, SIGKILL);
                    int status = 0;
                    ::waitpid(pid, &status, 0);
                    throw error(
                        errc::install_timeout,
                        fmt::format("'{}' did not finish within {} s", argv.front(), *options.timeout_seconds)
                    );
                }
                wait_ms = static_cast<int>(left * 1000) + 1;
            }
            const int ready = ::poll(fds, 2, wait_ms);
            if (ready < 0)
            {
                if (errno == EINTR)
                {
                    continue;
                }
                break;
            }
            for (int i = 0; i < 2; ++i)
            {
                if (fds[i].fd < 0 || (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) == 0)
                {
                    continue;
                }
                const auto n = ::read(fds[i].fd, buffer, sizeof(buffer));
                if (n <= 0)
                {
                    if (n < 0 && errno == EINTR)
                    {
                        continue;
                    }
                    fds[i].fd = -1;
                    --open_streams;
                    continue;
                }
                const std::string_view chunk(buffer, static_cast<std::size_t>(n));
                auto& sink = i == 0 ? result.out : result.err;
                sink.append(chunk);
                const auto& callback = i == 0 ? options.on_out : options.on_err;
                if (callback)
                {
                    callback(chunk);
                }
            }
        }

        int status = 0;
        while (::waitpid(pid, &status, 0) < 0 && errno == EINTR)
        {
        }
        result.duration = seconds_since(start);
        if (WIFEXITED(status))
        {
            result.exit_code = WEXITSTATUS(status);
        }
        else if (WIFSIGNALED(status))
        {
            result.exit_code = 128 + WTERMSIG(status);
        }
        return result;
    }

    InstallResult execute(const InstallCommand& cmd, const InstallerSettings& settings, Console& console)
    {
        InstallResult result;
        if (!confirm_install(cmd, settings, console))
        {
            result.status = install_status::declined;
            return result;
        }

        ProcessOptions options;
        options.env = cmd.env_overrides;
        options.timeout_seconds = settings.timeout_seconds;
        options.inherit_stdin = !settings.noninteractive;
        if (!settings.suppress_stdout)
        {
            options.on_out = console.out;
            options.on_err = console.err;
        }

        auto process = run_process(cmd.full_argv(), options);
        result.out = std::move(process.out);
        result.err = std::move(process.err);
        result.exit_code = process.exit_code;
        result.duration = process.duration;
        result.status = process.exit_code == 0 ? install_status::ok : install_status::failed;

        // A failed install always shows both streams, even when suppressed.
        if (result.status == install_status::failed && settings.suppress_stdout)
        {
            if (console.out)
            {
                console.out(result.out);
            }
            if (console.err)
            {
                console.err(result.err);
            }
        }
        return result;
    }
}
