#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace davos
{
    enum class pre_phase
    {
        alpha,
        beta,
        rc,
    };

    struct pre_release
    {
        pre_phase phase;
        std::uint64_t number = 0;

        bool operator==(const pre_release&) const = default;
    };

    /**
     * A package version in the Python packaging scheme.
     *
     * Parsing accepts every spelling the packaging standard allows
     * (``1.0-RC.1``, ``v1.0``, ``1.0-1``, ...) and stores the normalized
     * components. Comparison ignores trailing zeros in the release
     * (``1.0 == 1.0.0``) and follows the standard ordering of dev, pre, post
     * and local segments.
     */
    class Version
    {
    public:

        static Version parse(std::string_view text);
        static std::optional<Version> try_parse(std::string_view text) noexcept;

        [[nodiscard]] std::uint64_t epoch() const noexcept
        {
            return m_epoch;
        }

        [[nodiscard]] const std::vector<std::uint64_t>& release() const noexcept
        {
            return m_release;
        }

        [[nodiscard]] const std::optional<pre_release>& pre() const noexcept
        {
            return m_pre;
        }

        [[nodiscard]] const std::optional<std::uint64_t>& post() const noexcept
        {
            return m_post;
        }

        [[nodiscard]] const std::optional<std::uint64_t>& dev() const noexcept
        {
            return m_dev;
        }

        // Local label segments, lowercased; numeric segments have leading
        // zeros stripped.
        [[nodiscard]] const std::vector<std::string>& local() const noexcept
        {
            return m_local;
        }

        [[nodiscard]] bool is_prerelease() const noexcept
        {
            return m_pre.has_value() || m_dev.has_value();
        }

        [[nodiscard]] bool is_postrelease() const noexcept
        {
            return m_post.has_value();
        }

        [[nodiscard]] bool has_local() const noexcept
        {
            return !m_local.empty();
        }

        // Epoch and release only.
        [[nodiscard]] Version base_version() const;
        // Everything but the local label.
        [[nodiscard]] Version public_version() const;

        [[nodiscard]] std::string str() const;

        // The text this version was parsed from, trimmed.
        [[nodiscard]] const std::string& text() const noexcept
        {
            return m_text;
        }

        friend std::strong_ordering operator<=>(const Version& lhs, const Version& rhs) noexcept;

        friend bool operator==(const Version& lhs, const Version& rhs) noexcept
        {
            return (lhs <=> rhs) == std::strong_ordering::equal;
        }

    private:

        std::uint64_t m_epoch = 0;
        std::vector<std::uint64_t> m_release;
        std::optional<pre_release> m_pre;
        std::optional<std::uint64_t> m_post;
        std::optional<std::uint64_t> m_dev;
        std::vector<std::string> m_local;
        std::string m_text;
    };

    enum class spec_op
    {
        equal,
        not_equal,
        less_equal,
        greater_equal,
        less,
        greater,
        compatible,
        arbitrary,
    };

    [[nodiscard]] std::string_view to_string(spec_op op) noexcept;

    // One comparison clause such as ``>=1.2`` or ``==1.4.*``.
    class Specifier
    {
    public:

        static Specifier parse(std::string_view text);

        [[nodiscard]] spec_op op() const noexcept
        {
            return m_op;
        }

        // Version text as written, without the ``.*`` suffix.
        [[nodiscard]] const std::string& version_text() const noexcept
        {
            return m_version_text;
        }

        [[nodiscard]] bool is_wildcard() const noexcept
        {
            return m_wildcard;
        }

        // True when the clause names a pre-release (``>=2.0b1``), which makes
        // a derived prerelease policy admit pre-releases.
        [[nodiscard]] bool mentions_prerelease() const noexcept;

        // Evaluates the operator only; prerelease policy is applied by
        // SpecifierSet.
        [[nodiscard]] bool contains(const Version& candidate) const;

        [[nodiscard]] std::string str() const;

        bool operator==(const Specifier& other) const
        {
            return str() == other.str();
        }

    private:

        spec_op m_op = spec_op::equal;
        std::string m_version_text;
        bool m_wildcard = false;
        std::optional<Version> m_version;
    };

    // Tri-state prerelease policy: allow, disallow, or derive from clauses.
    using prerelease_policy = std::optional<bool>;

    /**
     * Conjunction of specifiers. An empty set admits every final release.
     *
     * Pre-releases are admitted when the policy is ``true``, or when it is
     * unset and at least one clause mentions a pre-release.
     */
    class SpecifierSet
    {
    public:

        SpecifierSet() = default;
        explicit SpecifierSet(std::vector<Specifier> clauses, prerelease_policy prereleases = std::nullopt);

        // Clauses separated by ``,``; with ``allow_semicolon`` ``;`` works too.
        static SpecifierSet parse(std::string_view text, bool allow_semicolon = false);

        [[nodiscard]] const std::vector<Specifier>& clauses() const noexcept
        {
            return m_clauses;
        }

        [[nodiscard]] bool empty() const noexcept
        {
            return m_clauses.empty();
        }

        [[nodiscard]] prerelease_policy prereleases() const noexcept
        {
            return m_prereleases;
        }

        void set_prereleases(prerelease_policy policy) noexcept
        {
            m_prereleases = policy;
        }

        [[nodiscard]] bool admits_prereleases() const noexcept;

        [[nodiscard]] bool contains(const Version& candidate) const;

        // Clauses joined by ``,`` in their original order.
        [[nodiscard]] std::string str() const;

        bool operator==(const SpecifierSet& other) const = default;

    private:

        std::vector<Specifier> m_clauses;
        prerelease_policy m_prereleases;
    };

    [[nodiscard]] bool matches(const Version& version, const SpecifierSet& spec);

    // A version-control reference such as
    // ``git+https://github.com/org/repo.git@v1.2#egg=repo``.
    struct VcsReference
    {
        std::string vcs;        // git, hg, svn, bzr
        std::string scheme;     // vcs plus transport, e.g. git+https
        std::string repo_url;   // transport URL without the vcs prefix or ref
        std::optional<std::string> ref;
        std::optional<std::string> subdirectory;
        std::optional<std::string> egg_name;

        static VcsReference parse(std::string_view text);

        // Distribution name implied by the reference: the egg name when
        // given, else the repository basename without ``.git``.
        [[nodiscard]] std::string implied_name() const;

        [[nodiscard]] std::string str() const;

        bool operator==(const VcsReference&) const = default;
    };

    [[nodiscard]] bool looks_like_vcs(std::string_view text) noexcept;

    struct PythonCheck
    {
        bool ok = true;
        std::string spec;
        std::string current;
    };

    // ``spec_text`` is either a bare version (treated as ``==``) or a
    // specifier set whose clauses may be separated by ``,`` or ``;``.
    [[nodiscard]] PythonCheck
    check_python(const Version& current, std::string_view spec_text, prerelease_policy prereleases = std::nullopt);
}
