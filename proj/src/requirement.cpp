#include "davos/requirement.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "davos/error.hpp"
#include "strings.hpp"

namespace davos
{
    namespace
    {
        bool is_name_char(char c) noexcept
        {
            return detail::is_alnum(c) || c == '-' || c == '_' || c == '.';
        }

        error malformed(std::string_view text, std::string_view why)
        {
            return error(errc::malformed_onion, fmt::format("Invalid requirement '{}': {}", text, why));
        }

        bool valid_name(std::string_view name) noexcept
        {
            if (name.empty() || !detail::is_alnum(name.front()) || !detail::is_alnum(name.back()))
            {
                return false;
            }
            return std::all_of(name.begin(), name.end(), is_name_char);
        }
    }

    std::string normalize_dist_name(std::string_view name)
    {
        std::string out;
        out.reserve(name.size());
        bool in_run = false;
        for (char c : name)
        {
            if (c == '-' || c == '_' || c == '.')
            {
                if (!in_run)
                {
                    out += '-';
                }
                in_run = true;
            }
            else
            {
                out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                in_run = false;
            }
        }
        return out;
    }

    std::string dist_to_module_name(std::string_view dist_name)
    {
        std::string out = normalize_dist_name(dist_name);
        std::replace(out.begin(), out.end(), '-', '_');
        return out;
    }

    Requirement Requirement::parse(std::string_view text)
    {
        const auto trimmed = detail::trim(text);
        if (trimmed.empty())
        {
            throw malformed(trimmed, "empty requirement");
        }
        if (trimmed.find(';') != std::string_view::npos)
        {
            throw malformed(trimmed, "environment markers are not supported");
        }

        Requirement req;
        if (looks_like_vcs(trimmed))
        {
            auto vcs = VcsReference::parse(trimmed);
            const auto name = vcs.implied_name();
            if (!valid_name(name))
            {
                throw malformed(trimmed, "cannot determine the distribution name; add '#egg=<name>'");
            }
            req.dist_name = normalize_dist_name(name);
            req.constraint = std::move(vcs);
            return req;
        }

        std::size_t pos = 0;
        while (pos < trimmed.size() && is_name_char(trimmed[pos]))
        {
            ++pos;
        }
        const auto name = trimmed.substr(0, pos);
        if (!valid_name(name))
        {
            throw malformed(trimmed, "invalid distribution name");
        }
        req.dist_name = normalize_dist_name(name);

        auto rest = detail::trim(trimmed.substr(pos));
        if (rest.starts_with('['))
        {
            const auto close = rest.find(']');
            if (close == std::string_view::npos)
            {
                throw malformed(trimmed, "unterminated extras list");
            }
            for (auto extra : detail::split_any(rest.substr(1, close - 1), ","))
            {
                extra = detail::trim(extra);
                if (!valid_name(extra))
                {
                    throw malformed(trimmed, fmt::format("invalid extra '{}'", extra));
                }
                auto normalized = normalize_dist_name(extra);
                if (std::find(req.extras.begin(), req.extras.end(), normalized) == req.extras.end())
                {
                    req.extras.push_back(std::move(normalized));
                }
            }
            rest = detail::trim(rest.substr(close + 1));
        }

        if (rest.empty())
        {
            return req;
        }
        if (rest.starts_with('@'))
        {
            const auto url = detail::trim(rest.substr(1));
            if (!looks_like_vcs(url))
            {
                throw malformed(trimmed, "only VCS URLs are supported after '@'");
            }
            req.constraint = VcsReference::parse(url);
            return req;
        }
        if (rest.starts_with('('))
        {
            if (!rest.ends_with(')'))
            {
                throw malformed(trimmed, "unbalanced parentheses");
            }
            rest = rest.substr(1, rest.size() - 2);
        }
        auto spec = SpecifierSet::parse(rest);
        if (!spec.empty())
        {
            req.constraint = std::move(spec);
        }
        return req;
    }

    std::string Requirement::str() const
    {
        std::string out = dist_name;
        if (!extras.empty())
        {
            out += "[" + detail::join(extras, ",") + "]";
        }
        if (const auto* spec = specifier())
        {
            out += spec->str();
        }
        else if (const auto* ref = vcs())
        {
            if (extras.empty() && normalize_dist_name(ref->implied_name()) == dist_name)
            {
                return ref->str();
            }
            out += " @ " + ref->str();
        }
        return out;
    }
}
