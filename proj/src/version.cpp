#include "davos/version.hpp"

#include <array>
#include <utility>

#include <fmt/format.h>

#include "davos/error.hpp"
#include "strings.hpp"

namespace davos
{
    namespace
    {
        using detail::is_digit;

        bool is_sep(char c) noexcept
        {
            return c == '-' || c == '_' || c == '.';
        }

        // Hand-written scanner for the packaging version grammar. Works on a
        // lowercased copy of the input.
        class version_scanner
        {
        public:

            explicit version_scanner(std::string_view text)
                : m_s(text)
            {
            }

            bool at_end() const noexcept
            {
                return m_pos == m_s.size();
            }

            char peek(std::size_t ahead = 0) const noexcept
            {
                return m_pos + ahead < m_s.size() ? m_s[m_pos + ahead] : '\0';
            }

            bool eat(char c) noexcept
            {
                if (peek() == c)
                {
                    ++m_pos;
                    return true;
                }
                return false;
            }

            bool eat(std::string_view word) noexcept
            {
                if (m_s.substr(m_pos).starts_with(word))
                {
                    m_pos += word.size();
                    return true;
                }
                return false;
            }

            // Reads a run of digits. Returns false when there is none or the
            // value does not fit.
            bool number(std::uint64_t& out) noexcept
            {
                const std::size_t begin = m_pos;
                std::uint64_t value = 0;
                while (is_digit(peek()))
                {
                    const auto digit = static_cast<std::uint64_t>(peek() - '0');
                    if (value > (UINT64_MAX - digit) / 10)
                    {
                        m_overflow = true;
                        return false;
                    }
                    value = value * 10 + digit;
                    ++m_pos;
                }
                out = value;
                return m_pos != begin;
            }

            // ``[-_.]?N`` after a pre/post/dev label; the number defaults to 0.
            bool implicit_number(std::uint64_t& out) noexcept
            {
                out = 0;
                if (is_sep(peek()) && is_digit(peek(1)))
                {
                    ++m_pos;
                }
                if (is_digit(peek()))
                {
                    return number(out);
                }
                return !m_overflow;
            }

            std::size_t pos() const noexcept
            {
                return m_pos;
            }

            void reset(std::size_t pos) noexcept
            {
                m_pos = pos;
            }

            std::string_view rest() const noexcept
            {
                return m_s.substr(m_pos);
            }

        private:

            std::string_view m_s;
            std::size_t m_pos = 0;
            bool m_overflow = false;
        };

        std::string strip_leading_zeros(std::string_view digits)
        {
            std::size_t i = 0;
            while (i + 1 < digits.size() && digits[i] == '0')
            {
                ++i;
            }
            return std::string(digits.substr(i));
        }

        bool all_digits(std::string_view s) noexcept
        {
            if (s.empty())
            {
                return false;
            }
            for (char c : s)
            {
                if (!is_digit(c))
                {
                    return false;
                }
            }
            return true;
        }

        std::strong_ordering compare_local_segment(const std::string& a, const std::string& b)
        {
            const bool a_num = all_digits(a);
            const bool b_num = all_digits(b);
            if (a_num && b_num)
            {
                if (a.size() != b.size())
                {
                    return a.size() <=> b.size();
                }
                return a.compare(b) <=> 0;
            }
            if (a_num != b_num)
            {
                // Numeric segments sort after alphanumeric ones.
                return a_num ? std::strong_ordering::greater : std::strong_ordering::less;
            }
            return a.compare(b) <=> 0;
        }

        std::string_view phase_text(pre_phase phase)
        {
            switch (phase)
            {
                case pre_phase::alpha:
                    return "a";
                case pre_phase::beta:
                    return "b";
                case pre_phase::rc:
                    return "rc";
            }
            return "";
        }

        // Epoch and the first ``prefix.size()`` release components match,
        // padding the candidate with zeros.
        bool prefix_match(const Version& candidate, std::uint64_t epoch, const std::vector<std::uint64_t>& prefix)
        {
            if (candidate.epoch() != epoch)
            {
                return false;
            }
            const auto& release = candidate.release();
            for (std::size_t i = 0; i < prefix.size(); ++i)
            {
                const std::uint64_t have = i < release.size() ? release[i] : 0;
                if (have != prefix[i])
                {
                    return false;
                }
            }
            return true;
        }
    }

    Version Version::parse(std::string_view text)
    {
        auto parsed = try_parse(text);
        if (!parsed)
        {
            throw error(errc::invalid_version, fmt::format("Invalid version: '{}'", text));
        }
        return std::move(*parsed);
    }

    std::optional<Version> Version::try_parse(std::string_view text) noexcept
    {
        try
        {
            const auto trimmed = detail::trim(text);
            if (trimmed.empty())
            {
                return std::nullopt;
            }
            const std::string lowered = detail::to_lower(trimmed);
            version_scanner sc(lowered);
            Version v;
            v.m_text = std::string(trimmed);

            sc.eat('v');
            std::uint64_t first = 0;
            if (!sc.number(first))
            {
                return std::nullopt;
            }
            if (sc.eat('!'))
            {
                v.m_epoch = first;
                if (!sc.number(first))
                {
                    return std::nullopt;
                }
            }
            v.m_release.push_back(first);
            while (sc.peek() == '.' && is_digit(sc.peek(1)))
            {
                sc.eat('.');
                std::uint64_t part = 0;
                if (!sc.number(part))
                {
                    return std::nullopt;
                }
                v.m_release.push_back(part);
            }

            // Longest labels first so "preview" is not read as "pre" + "view".
            static constexpr std::array<std::pair<std::string_view, pre_phase>, 8> pre_labels = {{
                {"preview", pre_phase::rc},
                {"alpha", pre_phase::alpha},
                {"beta", pre_phase::beta},
                {"pre", pre_phase::rc},
                {"rc", pre_phase::rc},
                {"a", pre_phase::alpha},
                {"b", pre_phase::beta},
                {"c", pre_phase::rc},
            }};

            {
                const auto save = sc.pos();
                if (is_sep(sc.peek()))
                {
                    sc.reset(save + 1);
                }
                bool found = false;
                for (const auto& [label, phase] : pre_labels)
                {
                    if (sc.eat(label))
                    {
                        std::uint64_t n = 0;
                        if (!sc.implicit_number(n))
                        {
                            return std::nullopt;
                        }
                        v.m_pre = pre_release{phase, n};
                        found = true;
                        break;
                    }
                }
                if (!found)
                {
                    sc.reset(save);
                }
            }

            {
                const auto save = sc.pos();
                if (sc.peek() == '-' && is_digit(sc.peek(1)))
                {
                    sc.eat('-');
                    std::uint64_t n = 0;
                    if (!sc.number(n))
                    {
                        return std::nullopt;
                    }
                    v.m_post = n;
                }
                else
                {
                    if (is_sep(sc.peek()))
                    {
                        sc.reset(save + 1);
                    }
                    if (sc.eat("post") || sc.eat("rev") || sc.eat("r"))
                    {
                        std::uint64_t n = 0;
                        if (!sc.implicit_number(n))
                        {
                            return std::nullopt;
                        }
                        v.m_post = n;
                    }
                    else
                    {
                        sc.reset(save);
                    }
                }
            }

            {
                const auto save = sc.pos();
                if (is_sep(sc.peek()))
                {
                    sc.reset(save + 1);
                }
                if (sc.eat("dev"))
                {
                    std::uint64_t n = 0;
                    if (!sc.implicit_number(n))
                    {
                        return std::nullopt;
                    }
                    v.m_dev = n;
                }
                else
                {
                    sc.reset(save);
                }
            }

            if (sc.eat('+'))
            {
                const auto rest = sc.rest();
                if (rest.empty())
                {
                    return std::nullopt;
                }
                for (auto segment : detail::split_any(rest, "-_."))
                {
                    if (segment.empty())
                    {
                        return std::nullopt;
                    }
                    for (char c : segment)
                    {
                        if (!detail::is_alnum(c))
                        {
                            return std::nullopt;
                        }
                    }
                    v.m_local.push_back(all_digits(segment) ? strip_leading_zeros(segment) : std::string(segment));
                }
                sc.reset(lowered.size());
            }

            if (!sc.at_end())
            {
                return std::nullopt;
            }
            return v;
        }
        catch (...)
        {
            return std::nullopt;
        }
    }

    Version Version::base_version() const
    {
        Version v;
        v.m_epoch = m_epoch;
        v.m_release = m_release;
        v.m_text = v.str();
        return v;
    }

    Version Version::public_version() const
    {
        Version v = *this;
        v.m_local.clear();
        v.m_text = v.str();
        return v;
    }

    std::string Version::str() const
    {
        std::string out;
        if (m_epoch != 0)
        {
            out += fmt::format("{}!", m_epoch);
        }
        out += fmt::format("{}", fmt::join(m_release, "."));
        if (m_pre)
        {
            out += fmt::format("{}{}", phase_text(m_pre->phase), m_pre->number);
        }
        if (m_post)
        {
            out += fmt::format(".post{}", *m_post);
        }
        if (m_dev)
        {
            out += fmt::format(".dev{}", *m_dev);
        }
        if (!m_local.empty())
        {
            out += "+" + detail::join(m_local, ".");
        }
        return out;
    }

    std::strong_ordering operator<=>(const Version& lhs, const Version& rhs) noexcept
    {
        if (auto c = lhs.m_epoch <=> rhs.m_epoch; c != 0)
        {
            return c;
        }

        const std::size_t n = std::max(lhs.m_release.size(), rhs.m_release.size());
        for (std::size_t i = 0; i < n; ++i)
        {
            const std::uint64_t a = i < lhs.m_release.size() ? lhs.m_release[i] : 0;
            const std::uint64_t b = i < rhs.m_release.size() ? rhs.m_release[i] : 0;
            if (auto c = a <=> b; c != 0)
            {
                return c;
            }
        }

        // A bare dev release sorts before every pre-release of its release;
        // no pre-release at all sorts after them.
        auto pre_key = [](const Version& v) -> std::tuple<int, int, std::uint64_t>
        {
            if (!v.m_pre && !v.m_post && v.m_dev)
            {
                return {-1, 0, 0};
            }
            if (!v.m_pre)
            {
                return {1, 0, 0};
            }
            return {0, static_cast<int>(v.m_pre->phase), v.m_pre->number};
        };
        if (auto c = pre_key(lhs) <=> pre_key(rhs); c != 0)
        {
            return c;
        }

        auto post_key = [](const Version& v) -> std::pair<int, std::uint64_t>
        { return v.m_post ? std::pair<int, std::uint64_t>{1, *v.m_post} : std::pair<int, std::uint64_t>{0, 0}; };
        if (auto c = post_key(lhs) <=> post_key(rhs); c != 0)
        {
            return c;
        }

        auto dev_key = [](const Version& v) -> std::pair<int, std::uint64_t>
        { return v.m_dev ? std::pair<int, std::uint64_t>{0, *v.m_dev} : std::pair<int, std::uint64_t>{1, 0}; };
        if (auto c = dev_key(lhs) <=> dev_key(rhs); c != 0)
        {
            return c;
        }

        const std::size_t m = std::min(lhs.m_local.size(), rhs.m_local.size());
        for (std::size_t i = 0; i < m; ++i)
        {
            if (auto c = compare_local_segment(lhs.m_local[i], rhs.m_local[i]); c != 0)
            {
                return c;
            }
        }
        return lhs.m_local.size() <=> rhs.m_local.size();
    }

    std::string_view to_string(spec_op op) noexcept
    {
        switch (op)
        {
            case spec_op::equal:
                return "==";
            case spec_op::not_equal:
                return "!=";
            case spec_op::less_equal:
                return "<=";
            case spec_op::greater_equal:
                return ">=";
            case spec_op::less:
                return "<";
            case spec_op::greater:
                return ">";
            case spec_op::compatible:
                return "~=";
            case spec_op::arbitrary:
                return "===";
        }
        return "";
    }

    Specifier Specifier::parse(std::string_view text)
    {
        const auto trimmed = detail::trim(text);
        auto fail = [&](std::string_view why)
        { return error(errc::invalid_specifier, fmt::format("Invalid specifier '{}': {}", trimmed, why)); };

        static constexpr std::array<std::pair<std::string_view, spec_op>, 8> ops = {{
            {"===", spec_op::arbitrary},
            {"~=", spec_op::compatible},
            {"==", spec_op::equal},
            {"!=", spec_op::not_equal},
            {"<=", spec_op::less_equal},
            {">=", spec_op::greater_equal},
            {"<", spec_op::less},
            {">", spec_op::greater},
        }};

        Specifier spec;
        std::string_view rest;
        bool found = false;
        for (const auto& [token, op] : ops)
        {
            if (trimmed.starts_with(token))
            {
                spec.m_op = op;
                rest = detail::trim(trimmed.substr(token.size()));
                found = true;
                break;
            }
        }
        if (!found)
        {
            throw fail("missing comparison operator");
        }
        if (rest.empty())
        {
            throw fail("missing version");
        }
        for (char c : rest)
        {
            if (detail::is_space(c))
            {
                throw fail("unexpected whitespace");
            }
        }

        if (spec.m_op == spec_op::arbitrary)
        {
            spec.m_version_text = std::string(rest);
            spec.m_version = Version::try_parse(rest);
            return spec;
        }

        const bool equality = spec.m_op == spec_op::equal || spec.m_op == spec_op::not_equal;
        if (rest.ends_with(".*"))
        {
            if (!equality)
            {
                throw fail("wildcards are only allowed with == and !=");
            }
            rest.remove_suffix(2);
            spec.m_wildcard = true;
        }

        auto version = Version::try_parse(rest);
        if (!version)
        {
            throw fail("not a valid version");
        }
        if (spec.m_wildcard && (version->pre() || version->post() || version->dev() || version->has_local()))
        {
            throw fail("wildcards may only follow a release segment");
        }
        if (!equality && version->has_local())
        {
            throw fail("local versions are only allowed with == and !=");
        }
        if (spec.m_op == spec_op::compatible && version->release().size() < 2)
        {
            throw fail("~= requires at least two release components");
        }
        spec.m_version_text = std::string(rest);
        spec.m_version = std::move(version);
        return spec;
    }

    bool Specifier::mentions_prerelease() const noexcept
    {
        // "!=1.0a1" excludes a pre-release rather than asking for one.
        if (m_op == spec_op::not_equal || m_wildcard || !m_version)
        {
            return false;
        }
        return m_version->is_prerelease();
    }

    bool Specifier::contains(const Version& candidate) const
    {
        if (m_op == spec_op::arbitrary)
        {
            return detail::to_lower(candidate.text()) == detail::to_lower(m_version_text);
        }

        const Version& spec = *m_version;
        switch (m_op)
        {
            case spec_op::equal:
            case spec_op::not_equal:
            {
                bool equal = false;
                if (m_wildcard)
                {
                    equal = prefix_match(candidate, spec.epoch(), spec.release());
                }
                else if (spec.has_local())
                {
                    equal = candidate == spec;
                }
                else
                {
                    equal = candidate.public_version() == spec;
                }
                return m_op == spec_op::equal ? equal : !equal;
            }
            case spec_op::less_equal:
                return candidate.public_version() <= spec;
            case spec_op::greater_equal:
                return candidate.public_version() >= spec;
            case spec_op::less:
                if (!(candidate < spec))
                {
                    return false;
                }
                // "<2.0" does not admit 2.0rc1.
                return spec.is_prerelease() || !candidate.is_prerelease()
                       || candidate.base_version() != spec.base_version();
            case spec_op::greater:
                if (!(candidate > spec))
                {
                    return false;
                }
                if (!spec.is_postrelease() && candidate.is_postrelease()
                    && candidate.base_version() == spec.base_version())
                {
                    return false;
                }
                return !(candidate.has_local() && candidate.base_version() == spec.base_version());
            case spec_op::compatible:
            {
                if (!(candidate.public_version() >= spec))
                {
                    return false;
                }
                std::vector<std::uint64_t> prefix(spec.release().begin(), spec.release().end() - 1);
                return prefix_match(candidate, spec.epoch(), prefix);
            }
            case spec_op::arbitrary:
                break;
        }
        return false;
    }

    std::string Specifier::str() const
    {
        return fmt::format("{}{}{}", to_string(m_op), m_version_text, m_wildcard ? ".*" : "");
    }

    SpecifierSet::SpecifierSet(std::vector<Specifier> clauses, prerelease_policy prereleases)
        : m_clauses(std::move(clauses))
        , m_prereleases(prereleases)
    {
    }

    SpecifierSet SpecifierSet::parse(std::string_view text, bool allow_semicolon)
    {
        const auto trimmed = detail::trim(text);
        if (trimmed.empty())
        {
            return {};
        }
        std::vector<Specifier> clauses;
        for (auto piece : detail::split_any(trimmed, allow_semicolon ? ",;" : ","))
        {
            if (detail::trim(piece).empty())
            {
                throw error(errc::invalid_specifier, fmt::format("Invalid specifier set '{}': empty clause", trimmed));
            }
            clauses.push_back(Specifier::parse(piece));
        }
        return SpecifierSet(std::move(clauses));
    }

    bool SpecifierSet::admits_prereleases() const noexcept
    {
        if (m_prereleases)
        {
            return *m_prereleases;
        }
        for (const auto& clause : m_clauses)
        {
            if (clause.mentions_prerelease())
            {
                return true;
            }
        }
        return false;
    }

    bool SpecifierSet::contains(const Version& candidate) const
    {
        if (candidate.is_prerelease() && !admits_prereleases())
        {
            return false;
        }
        for (const auto& clause : m_clauses)
        {
            if (!clause.contains(candidate))
            {
                return false;
            }
        }
        return true;
    }

    std::string SpecifierSet::str() const
    {
        std::vector<std::string> parts;
        parts.reserve(m_clauses.size());
        for (const auto& clause : m_clauses)
        {
            parts.push_back(clause.str());
        }
        return detail::join(parts, ",");
    }

    bool matches(const Version& version, const SpecifierSet& spec)
    {
        return spec.contains(version);
    }

    namespace
    {
        constexpr std::array<std::string_view, 4> vcs_names = {"git", "hg", "svn", "bzr"};
        constexpr std::array<std::string_view, 6> transports = {"https", "http", "ssh", "file", "git", "svn"};
    }

    bool looks_like_vcs(std::string_view text) noexcept
    {
        for (auto vcs : vcs_names)
        {
            if (text.size() > vcs.size() && text.starts_with(vcs) && text[vcs.size()] == '+')
            {
                return true;
            }
        }
        return false;
    }

    VcsReference VcsReference::parse(std::string_view text)
    {
        const auto trimmed = detail::trim(text);
        auto fail = [&](std::string_view why)
        { return error(errc::invalid_vcs_reference, fmt::format("Invalid VCS reference '{}': {}", trimmed, why)); };

        const auto plus = trimmed.find('+');
        const auto colon = trimmed.find("://");
        if (plus == std::string_view::npos || colon == std::string_view::npos || plus > colon)
        {
            throw fail("expected <vcs>+<transport>://...");
        }
        VcsReference ref;
        ref.vcs = detail::to_lower(trimmed.substr(0, plus));
        const std::string transport = detail::to_lower(trimmed.substr(plus + 1, colon - plus - 1));
        if (std::find(vcs_names.begin(), vcs_names.end(), ref.vcs) == vcs_names.end())
        {
            throw fail(fmt::format("unsupported version control system '{}'", ref.vcs));
        }
        if (std::find(transports.begin(), transports.end(), transport) == transports.end())
        {
            throw fail(fmt::format("unsupported transport '{}'", transport));
        }
        ref.scheme = ref.vcs + "+" + transport;

        std::string_view rest = trimmed.substr(colon + 3);
        if (const auto hash = rest.find('#'); hash != std::string_view::npos)
        {
            const auto fragment = rest.substr(hash + 1);
            rest = rest.substr(0, hash);
            for (auto item : detail::split_any(fragment, "&"))
            {
                if (item.empty())
                {
                    continue;
                }
                const auto eq = item.find('=');
                if (eq == std::string_view::npos || eq + 1 == item.size())
                {
                    throw fail(fmt::format("malformed fragment '{}'", item));
                }
                const auto key = item.substr(0, eq);
                const auto value = std::string(item.substr(eq + 1));
                if (key == "egg")
                {
                    ref.egg_name = value;
                }
                else if (key == "subdirectory")
                {
                    ref.subdirectory = value;
                }
                else
                {
                    throw fail(fmt::format("unknown fragment key '{}'", key));
                }
            }
        }

        // The authority may contain '@' (user@host); a ref '@' only counts
        // inside the path.
        const auto slash = rest.find('/');
        if (slash == std::string_view::npos && transport != "file")
        {
            throw fail("missing repository path");
        }
        const std::size_t path_start = slash == std::string_view::npos ? 0 : slash;
        if (const auto at = rest.rfind('@'); at != std::string_view::npos && at > path_start)
        {
            const auto name = rest.substr(at + 1);
            if (name.empty())
            {
                throw fail("empty ref after '@'");
            }
            ref.ref = std::string(name);
            rest = rest.substr(0, at);
        }
        if (rest.empty() || (slash != std::string_view::npos && rest.size() <= slash + 1 && transport != "file"))
        {
            throw fail("missing repository path");
        }
        ref.repo_url = transport + "://" + std::string(rest);
        return ref;
    }

    std::string VcsReference::implied_name() const
    {
        if (egg_name)
        {
            return *egg_name;
        }
        std::string_view url = repo_url;
        while (url.ends_with('/'))
        {
            url.remove_suffix(1);
        }
        auto base = url.substr(url.rfind('/') + 1);
        if (base.ends_with(".git"))
        {
            base.remove_suffix(4);
        }
        return std::string(base);
    }

    std::string VcsReference::str() const
    {
        std::string out = vcs + "+" + repo_url;
        if (ref)
        {
            out += "@" + *ref;
        }
        std::vector<std::string> fragment;
        if (egg_name)
        {
            fragment.push_back("egg=" + *egg_name);
        }
        if (subdirectory)
        {
            fragment.push_back("subdirectory=" + *subdirectory);
        }
        if (!fragment.empty())
        {
            out += "#" + detail::join(fragment, "&");
        }
        return out;
    }

    PythonCheck check_python(const Version& current, std::string_view spec_text, prerelease_policy prereleases)
    {
        const auto trimmed = detail::trim(spec_text);
        if (trimmed.empty())
        {
            throw error(errc::invalid_specifier, "Empty Python version specifier");
        }
        SpecifierSet spec = (is_digit(trimmed.front()) || trimmed.front() == 'v')
                                ? SpecifierSet::parse(fmt::format("=={}", trimmed))
                                : SpecifierSet::parse(trimmed, true);
        spec.set_prereleases(prereleases);
        return PythonCheck{spec.contains(current), std::string(trimmed), current.str()};
    }
}
