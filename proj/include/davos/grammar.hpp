#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "davos/requirement.hpp"

namespace davos
{
    enum class smuggle_form
    {
        plain,     // smuggle a.b
        plain_as,  // smuggle a.b as c
        from,      // from a.b smuggle c, d
        from_as,   // from a.b smuggle c as e, d
        multi,     // smuggle a, b as c
    };

    [[nodiscard]] std::string_view to_string(smuggle_form form) noexcept;

    struct ImportedName
    {
        std::string name;
        std::optional<std::string> alias;

        bool operator==(const ImportedName&) const = default;
    };

    enum class installer_kind
    {
        pip,
    };

    // One installer option, stored under its canonical long spelling.
    struct OnionFlag
    {
        std::string name;
        std::optional<std::string> value;

        bool operator==(const OnionFlag&) const = default;
    };

    /**
     * A parsed ``# pip: <requirement> <options>`` comment.
     *
     * Equality ignores ``raw_args`` so that a re-serialized spec compares
     * equal to the one it came from.
     */
    struct OnionSpec
    {
        installer_kind installer = installer_kind::pip;
        Requirement requirement;
        std::vector<OnionFlag> flags;
        std::string raw_args;

        [[nodiscard]] bool has_flag(std::string_view name) const noexcept;
        [[nodiscard]] std::optional<std::string> flag_value(std::string_view name) const;

        // -I/--ignore-installed, -U/--upgrade or --force-reinstall: install a
        // fresh copy without checking what exists locally.
        [[nodiscard]] bool force_install() const noexcept;
        // --no-input: non-interactive for this statement only.
        [[nodiscard]] bool no_input() const noexcept;
        [[nodiscard]] std::optional<std::string> target_dir() const;

        // Options rendered as installer arguments, in their original order.
        [[nodiscard]] std::vector<std::string> option_args() const;

        // ``<requirement> <options...>``, quoted where needed; parses back to
        // an equal spec.
        [[nodiscard]] std::string serialize_args() const;

        bool operator==(const OnionSpec& other) const
        {
            return installer == other.installer && requirement == other.requirement && flags == other.flags;
        }
    };

    // Parses the argument part of an onion comment (everything after
    // ``pip:``). Throws MalformedOnion or DisallowedFlag.
    [[nodiscard]] OnionSpec parse_onion_args(std::string_view args);

    struct SmuggleStatement
    {
        smuggle_form form = smuggle_form::plain;
        std::string root_name;
        std::vector<ImportedName> from_attrs;
        std::optional<std::string> alias;
        // MULTI only: every smuggled module with its alias.
        std::vector<ImportedName> names;
        std::optional<OnionSpec> onion;
        std::size_t line_no = 0;
        std::string indent;

        // First dotted segment of root_name.
        [[nodiscard]] std::string top_level_module() const;

        // MULTI statements become one PLAIN / PLAIN_AS statement per name;
        // every other form is returned unchanged.
        [[nodiscard]] std::vector<SmuggleStatement> expand() const;

        bool operator==(const SmuggleStatement&) const = default;
    };

    // nullopt when the line holds no smuggle statement (including when the
    // keyword only occurs in a string or a comment).
    [[nodiscard]] std::optional<SmuggleStatement> parse_line(std::string_view line, std::size_t line_no);

    // The canonical ``smuggle(...)`` call for a statement. MULTI statements
    // yield ``;``-separated calls.
    [[nodiscard]] std::string render_call(const SmuggleStatement& stmt);

    struct TransformResult
    {
        std::string source;
        // MULTI statements are recorded once per name.
        std::vector<SmuggleStatement> statements;
    };

    [[nodiscard]] TransformResult transform_source(std::string_view cell);

    // Rejects location-changing options when a project is in use and
    // re-checks disallowed options.
    [[nodiscard]] OnionSpec validate_onion_flags(OnionSpec spec, bool project_enabled);

    // Quotes text as a Python string literal.
    [[nodiscard]] std::string python_string_literal(std::string_view text);
}
