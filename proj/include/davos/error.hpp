#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace davos
{
    // Every failure the core can report. The string form (to_string) is part
    // of the CLI protocol and must stay stable.
    enum class errc
    {
        malformed_smuggle,
        malformed_onion,
        disallowed_flag,
        unknown_installer,
        location_flag_with_project,
        invalid_version,
        invalid_specifier,
        invalid_vcs_reference,
        project_root_unwritable,
        empty_name,
        project_exists,
        project_not_found,
        project_name_too_long,
        noninteractive_requires_yes,
        installer_not_found,
        install_failed,
        install_timeout,
        post_install_mismatch,
        read_only_option,
        invalid_value,
        incompatible_options,
        unknown_option,
        not_a_notebook,
        unsupported_format_version,
        python_version_mismatch,
        io_error,
        usage,
    };

    [[nodiscard]] std::string_view to_string(errc code) noexcept;

    class error : public std::runtime_error
    {
    public:

        error(errc code, const std::string& message, std::optional<std::size_t> line = std::nullopt)
            : std::runtime_error(message)
            , m_code(code)
            , m_line(line)
        {
        }

        [[nodiscard]] errc code() const noexcept
        {
            return m_code;
        }

        // 1-based source line, when the error came from parsing a cell or file.
        [[nodiscard]] std::optional<std::size_t> line() const noexcept
        {
            return m_line;
        }

    private:

        errc m_code;
        std::optional<std::size_t> m_line;
    };

    // The installer ran and exited non-zero. Both streams are kept so callers
    // can surface them even when console output was suppressed.
    class install_error : public error
    {
    public:

        install_error(std::string message, int exit_code, std::string out, std::string err)
            : error(errc::install_failed, message)
            , m_exit_code(exit_code)
            , m_stdout(std::move(out))
            , m_stderr(std::move(err))
        {
        }

        [[nodiscard]] int exit_code() const noexcept
        {
            return m_exit_code;
        }

        [[nodiscard]] const std::string& captured_stdout() const noexcept
        {
            return m_stdout;
        }

        [[nodiscard]] const std::string& captured_stderr() const noexcept
        {
            return m_stderr;
        }

    private:

        int m_exit_code;
        std::string m_stdout;
        std::string m_stderr;
    };
}
