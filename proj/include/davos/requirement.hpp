#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "davos/version.hpp"

namespace davos
{
    // Lowercase, with every run of ``-``, ``_`` and ``.`` collapsed to ``-``.
    [[nodiscard]] std::string normalize_dist_name(std::string_view name);

    // Converts a distribution name to the module name it most likely
    // installs (``scikit-learn`` -> ``scikit_learn``).
    [[nodiscard]] std::string dist_to_module_name(std::string_view dist_name);

    using Constraint = std::variant<std::monostate, SpecifierSet, VcsReference>;

    /**
     * What to install: a distribution name, optional extras, and at most one
     * of a version specifier set or a VCS reference.
     */
    struct Requirement
    {
        std::string dist_name;
        std::vector<std::string> extras;
        Constraint constraint;

        // Accepts ``name[extra,...]<specifiers>``, a bare VCS URL, or
        // ``name[extras] @ <vcs-url>``.
        static Requirement parse(std::string_view text);

        [[nodiscard]] bool has_specifier() const noexcept
        {
            return std::holds_alternative<SpecifierSet>(constraint);
        }

        [[nodiscard]] bool has_vcs() const noexcept
        {
            return std::holds_alternative<VcsReference>(constraint);
        }

        [[nodiscard]] const SpecifierSet* specifier() const noexcept
        {
            return std::get_if<SpecifierSet>(&constraint);
        }

        [[nodiscard]] const VcsReference* vcs() const noexcept
        {
            return std::get_if<VcsReference>(&constraint);
        }

        // Rendered for the installer's command line.
        [[nodiscard]] std::string str() const;

        bool operator==(const Requirement&) const = default;
    };
}
