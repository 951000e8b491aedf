#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the parsers. Internal to the library.
namespace davos::detail
{
    inline bool is_space(char c) noexcept
    {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
    }

    inline bool is_digit(char c) noexcept
    {
        return c >= '0' && c <= '9';
    }

    inline bool is_alnum(char c) noexcept
    {
        return std::isalnum(static_cast<unsigned char>(c)) != 0;
    }

    inline std::string_view trim(std::string_view s) noexcept
    {
        while (!s.empty() && is_space(s.front()))
        {
            s.remove_prefix(1);
        }
        while (!s.empty() && is_space(s.back()))
        {
            s.remove_suffix(1);
        }
        return s;
    }

    inline std::string to_lower(std::string_view s)
    {
        std::string out(s);
        std::transform(
            out.begin(),
            out.end(),
            out.begin(),
            [](unsigned char c) { return static_cast<char>(std::tolower(c)); }
        );
        return out;
    }

    inline std::vector<std::string_view> split_any(std::string_view s, std::string_view seps)
    {
        std::vector<std::string_view> out;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= s.size(); ++i)
        {
            if (i == s.size() || seps.find(s[i]) != std::string_view::npos)
            {
                out.push_back(s.substr(start, i - start));
                start = i + 1;
            }
        }
        return out;
    }

    inline std::string join(const std::vector<std::string>& parts, std::string_view sep)
    {
        std::string out;
        for (std::size_t i = 0; i < parts.size(); ++i)
        {
            if (i != 0)
            {
                out += sep;
            }
            out += parts[i];
        }
        return out;
    }
}
