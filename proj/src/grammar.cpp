#include "davos/grammar.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "davos/error.hpp"
#include "strings.hpp"

namespace davos
{
    namespace
    {
        struct option_info
        {
            std::string_view name;
            char short_name;
            bool takes_value;
        };

        // pip install options. Anything not listed is passed through as a
        // boolean switch.
        constexpr option_info pip_options[] = {
            {"--abi", 0, true},
            {"--break-system-packages", 0, false},
            {"--cache-dir", 0, true},
            {"--cert", 0, true},
            {"--check-build-dependencies", 0, false},
            {"--client-cert", 0, true},
            {"--compile", 0, false},
            {"--config-settings", 'C', true},
            {"--constraint", 'c', true},
            {"--disable-pip-version-check", 0, false},
            {"--dry-run", 0, false},
            {"--editable", 'e', true},
            {"--exists-action", 0, true},
            {"--extra-index-url", 0, true},
            {"--find-links", 'f', true},
            {"--force-reinstall", 0, false},
            {"--global-option", 0, true},
            {"--group", 0, true},
            {"--help", 'h', false},
            {"--ignore-installed", 'I', false},
            {"--ignore-requires-python", 0, false},
            {"--implementation", 0, true},
            {"--index-url", 'i', true},
            {"--isolated", 0, false},
            {"--keyring-provider", 0, true},
            {"--log", 0, true},
            {"--no-binary", 0, true},
            {"--no-build-isolation", 0, false},
            {"--no-cache-dir", 0, false},
            {"--no-clean", 0, false},
            {"--no-color", 0, false},
            {"--no-compile", 0, false},
            {"--no-deps", 0, false},
            {"--no-index", 0, false},
            {"--no-input", 0, false},
            {"--no-python-version-warning", 0, false},
            {"--no-use-pep517", 0, false},
            {"--no-warn-conflicts", 0, false},
            {"--no-warn-script-location", 0, false},
            {"--only-binary", 0, true},
            {"--platform", 0, true},
            {"--pre", 0, false},
            {"--prefer-binary", 0, false},
            {"--prefix", 0, true},
            {"--progress-bar", 0, true},
            {"--proxy", 0, true},
            {"--python", 0, true},
            {"--python-version", 0, true},
            {"--quiet", 'q', false},
            {"--report", 0, true},
            {"--require-hashes", 0, false},
            {"--requirement", 'r', true},
            {"--resume-retries", 0, true},
            {"--retries", 0, true},
            {"--root", 0, true},
            {"--root-user-action", 0, true},
            {"--src", 0, true},
            {"--target", 't', true},
            {"--timeout", 0, true},
            {"--trusted-host", 0, true},
            {"--upgrade", 'U', false},
            {"--upgrade-strategy", 0, true},
            {"--use-deprecated", 0, true},
            {"--use-feature", 0, true},
            {"--use-pep517", 0, false},
            {"--user", 0, false},
            {"--verbose", 'v', false},
            {"--version", 'V', false},
            {"--log-file", 0, true},
        };

        // Options that would stop the package from being installed.
        constexpr std::array<std::string_view, 3> disallowed_options = {"--help", "--dry-run", "--version"};
        // Options that change where the package is installed.
        constexpr std::array<std::string_view, 4> location_options = {"--target", "--root", "--prefix", "--user"};
        // Options that select requirements other than the single positional.
        constexpr std::array<std::string_view, 2> multi_requirement_options = {"--requirement", "--editable"};
        constexpr std::array<std::string_view, 3> force_options = {"--ignore-installed", "--upgrade", "--force-reinstall"};

        // Installer names a comment could plausibly address. Only pip is
        // supported; the rest are rejected rather than silently ignored.
        constexpr std::array<std::string_view, 8> known_installers =
            {"pip", "conda", "mamba", "micromamba", "uv", "poetry", "pipenv", "pixi"};

        template <std::size_t N>
        bool contains(const std::array<std::string_view, N>& set, std::string_view name)
        {
            return std::find(set.begin(), set.end(), name) != set.end();
        }

        const option_info* find_long(std::string_view name, std::string_view whole)
        {
            for (const auto& opt : pip_options)
            {
                if (opt.name == name)
                {
                    return &opt;
                }
            }
            // Unique prefixes are accepted by the installer, so resolve them
            // here too; otherwise "--tar" would slip past the location check.
            const option_info* match = nullptr;
            for (const auto& opt : pip_options)
            {
                if (opt.name.starts_with(name))
                {
                    if (match != nullptr)
                    {
                        throw error(
                            errc::malformed_onion,
                            fmt::format("Ambiguous option '{}' in onion comment '{}'", name, whole)
                        );
                    }
                    match = &opt;
                }
            }
            return match;
        }

        const option_info* find_short(char c)
        {
            for (const auto& opt : pip_options)
            {
                if (opt.short_name == c)
                {
                    return &opt;
                }
            }
            return nullptr;
        }

        // Shell-like word splitting without any expansion.
        std::vector<std::string> split_words(std::string_view text)
        {
            std::vector<std::string> words;
            std::string current;
            bool in_word = false;
            for (std::size_t i = 0; i < text.size(); ++i)
            {
                const char c = text[i];
                if (detail::is_space(c))
                {
                    if (in_word)
                    {
                        words.push_back(std::move(current));
                        current.clear();
                        in_word = false;
                    }
                    continue;
                }
                in_word = true;
                if (c == '\'' || c == '"')
                {
                    const char quote = c;
                    bool closed = false;
                    for (++i; i < text.size(); ++i)
                    {
                        if (text[i] == quote)
                        {
                            closed = true;
                            break;
                        }
                        if (quote == '"' && text[i] == '\\' && i + 1 < text.size()
                            && (text[i + 1] == '"' || text[i + 1] == '\\'))
                        {
                            ++i;
                        }
                        current += text[i];
                    }
                    if (!closed)
                    {
                        throw error(errc::malformed_onion, fmt::format("Unterminated quote in onion comment '{}'", text));
                    }
                }
                else if (c == '\\' && i + 1 < text.size())
                {
                    current += text[++i];
                }
                else
                {
                    current += c;
                }
            }
            if (in_word)
            {
                words.push_back(std::move(current));
            }
            return words;
        }

        std::string quote_word(std::string_view word)
        {
            const bool plain = !word.empty()
                               && std::none_of(
                                   word.begin(),
                                   word.end(),
                                   [](char c) { return detail::is_space(c) || c == '"' || c == '\'' || c == '\\'; }
                               );
            if (plain)
            {
                return std::string(word);
            }
            std::string out = "\"";
            for (char c : word)
            {
                if (c == '"' || c == '\\')
                {
                    out += '\\';
                }
                out += c;
            }
            out += '"';
            return out;
        }

        enum class string_state
        {
            none,
            triple_single,
            triple_double,
        };

        struct scanned_line
        {
            // Index of the '#' starting a comment, or npos.
            std::size_t comment = std::string_view::npos;
            // Code characters (outside strings) that are semicolons.
            bool has_semicolon = false;
            std::vector<std::size_t> semicolons;
            // True when the line starts inside a multi-line string.
            bool starts_in_string = false;
            string_state end_state = string_state::none;
        };

        // Single pass over one physical line tracking quote and escape state.
        scanned_line scan_line(std::string_view line, string_state state)
        {
            scanned_line out;
            out.starts_in_string = state != string_state::none;
            std::size_t i = 0;

            auto close_triple = [&](char quote)
            {
                for (; i < line.size(); ++i)
                {
                    if (line[i] == '\\')
                    {
                        ++i;
                        continue;
                    }
                    if (line[i] == quote && i + 2 < line.size() && line[i + 1] == quote && line[i + 2] == quote)
                    {
                        i += 3;
                        return true;
                    }
                }
                return false;
            };

            if (state != string_state::none)
            {
                const char quote = state == string_state::triple_single ? '\'' : '"';
                if (!close_triple(quote))
                {
                    out.end_state = state;
                    return out;
                }
            }

            while (i < line.size())
            {
                const char c = line[i];
                if (c == '#')
                {
                    out.comment = i;
                    break;
                }
                if (c == ';')
                {
                    out.has_semicolon = true;
                    out.semicolons.push_back(i);
                }
                if (c == '\'' || c == '"')
                {
                    if (i + 2 < line.size() && line[i + 1] == c && line[i + 2] == c)
                    {
                        i += 3;
                        if (!close_triple(c))
                        {
                            out.end_state = c == '\'' ? string_state::triple_single : string_state::triple_double;
                            return out;
                        }
                        continue;
                    }
                    for (++i; i < line.size(); ++i)
                    {
                        if (line[i] == '\\')
                        {
                            ++i;
                            continue;
                        }
                        if (line[i] == c)
                        {
                            break;
                        }
                    }
                    ++i;
                    continue;
                }
                ++i;
            }
            return out;
        }

        constexpr std::array<std::string_view, 35> python_keywords = {
            "False", "None",   "True",    "and",      "as",       "assert", "async",  "await",    "break",
            "class", "continue", "def",   "del",      "elif",     "else",   "except", "finally",  "for",
            "from",  "global", "if",      "import",   "in",       "is",     "lambda", "nonlocal", "not",
            "or",    "pass",   "raise",   "return",   "try",      "while",  "with",   "yield",
        };

        bool is_ident_start(char c) noexcept
        {
            const auto u = static_cast<unsigned char>(c);
            return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || u >= 0x80;
        }

        bool is_ident_char(char c) noexcept
        {
            return is_ident_start(c) || detail::is_digit(c);
        }

        // Token stream over the code part of a statement.
        class statement_lexer
        {
        public:

            statement_lexer(std::string_view text, std::string_view line, std::size_t line_no)
                : m_text(text)
                , m_line(line)
                , m_line_no(line_no)
            {
            }

            [[noreturn]] void fail(std::string_view why) const
            {
                throw error(
                    errc::malformed_smuggle,
                    fmt::format("Invalid smuggle statement on line {}: {} ('{}')", m_line_no, why, detail::trim(m_line)),
                    m_line_no
                );
            }

            void skip_space()
            {
                while (m_pos < m_text.size() && detail::is_space(m_text[m_pos]))
                {
                    ++m_pos;
                }
            }

            bool at_end()
            {
                skip_space();
                return m_pos == m_text.size();
            }

            bool peek(char c)
            {
                skip_space();
                return m_pos < m_text.size() && m_text[m_pos] == c;
            }

            bool eat(char c)
            {
                if (peek(c))
                {
                    ++m_pos;
                    return true;
                }
                return false;
            }

            // Next identifier without consuming it; empty if none.
            std::string_view peek_ident()
            {
                skip_space();
                std::size_t end = m_pos;
                if (end < m_text.size() && is_ident_start(m_text[end]))
                {
                    while (end < m_text.size() && is_ident_char(m_text[end]))
                    {
                        ++end;
                    }
                }
                return m_text.substr(m_pos, end - m_pos);
            }

            bool eat_word(std::string_view word)
            {
                if (peek_ident() == word)
                {
                    m_pos += word.size();
                    return true;
                }
                return false;
            }

            std::string ident(std::string_view what)
            {
                const auto id = peek_ident();
                if (id.empty())
                {
                    fail(fmt::format("expected {}", what));
                }
                if (contains(python_keywords, id))
                {
                    fail(fmt::format("'{}' is a reserved word", id));
                }
                m_pos += id.size();
                return std::string(id);
            }

            std::string dotted(std::string_view what)
            {
                std::string name = ident(what);
                while (m_pos < m_text.size() && m_text[m_pos] == '.')
                {
                    ++m_pos;
                    name += '.';
                    if (m_pos >= m_text.size() || !is_ident_start(m_text[m_pos]))
                    {
                        fail(fmt::format("incomplete dotted name '{}'", name));
                    }
                    name += ident(what);
                }
                return name;
            }

            std::optional<std::string> maybe_alias()
            {
                if (eat_word("as"))
                {
                    return ident("an alias after 'as'");
                }
                return std::nullopt;
            }

        private:

            std::string_view m_text;
            std::string_view m_line;
            std::size_t m_line_no;
            std::size_t m_pos = 0;
        };

        // Returns the onion spec for a trailing comment, or nullopt when the
        // comment is an ordinary one.
        std::optional<OnionSpec> parse_onion_comment(std::string_view comment, std::size_t line_no)
        {
            std::string_view text = comment.substr(1);
            text = detail::trim(text);
            std::size_t end = 0;
            while (end < text.size() && (detail::is_alnum(text[end]) || text[end] == '_' || text[end] == '-' || text[end] == '.'))
            {
                ++end;
            }
            if (end == 0 || end >= text.size() || text[end] != ':')
            {
                return std::nullopt;
            }
            const auto installer = detail::to_lower(text.substr(0, end));
            if (!contains(known_installers, installer))
            {
                return std::nullopt;
            }
            if (installer != "pip")
            {
                throw error(
                    errc::unknown_installer,
                    fmt::format("Unsupported installer '{}' on line {}: only pip is supported", installer, line_no),
                    line_no
                );
            }
            try
            {
                return parse_onion_args(text.substr(end + 1));
            }
            catch (const error& e)
            {
                throw error(e.code(), fmt::format("line {}: {}", line_no, e.what()), line_no);
            }
        }
    }

    std::string_view to_string(smuggle_form form) noexcept
    {
        switch (form)
        {
            case smuggle_form::plain:
                return "PLAIN";
            case smuggle_form::plain_as:
                return "PLAIN_AS";
            case smuggle_form::from:
                return "FROM";
            case smuggle_form::from_as:
                return "FROM_AS";
            case smuggle_form::multi:
                return "MULTI";
        }
        return "";
    }

    bool OnionSpec::has_flag(std::string_view name) const noexcept
    {
        return std::any_of(flags.begin(), flags.end(), [&](const OnionFlag& f) { return f.name == name; });
    }

    std::optional<std::string> OnionSpec::flag_value(std::string_view name) const
    {
        // Last occurrence wins, as with the installer itself.
        for (auto it = flags.rbegin(); it != flags.rend(); ++it)
        {
            if (it->name == name)
            {
                return it->value;
            }
        }
        return std::nullopt;
    }

    bool OnionSpec::force_install() const noexcept
    {
        return std::any_of(force_options.begin(), force_options.end(), [&](auto name) { return has_flag(name); });
    }

    bool OnionSpec::no_input() const noexcept
    {
        return has_flag("--no-input");
    }

    std::optional<std::string> OnionSpec::target_dir() const
    {
        return flag_value("--target");
    }

    std::vector<std::string> OnionSpec::option_args() const
    {
        std::vector<std::string> args;
        for (const auto& flag : flags)
        {
            args.push_back(flag.name);
            if (flag.value)
            {
                args.push_back(*flag.value);
            }
        }
        return args;
    }

    std::string OnionSpec::serialize_args() const
    {
        std::vector<std::string> words;
        words.push_back(quote_word(requirement.str()));
        for (const auto& arg : option_args())
        {
            words.push_back(quote_word(arg));
        }
        return detail::join(words, " ");
    }

    OnionSpec parse_onion_args(std::string_view args)
    {
        const auto trimmed = detail::trim(args);
        OnionSpec spec;
        spec.raw_args = std::string(trimmed);
        const auto words = split_words(trimmed);
        if (words.empty())
        {
            throw error(errc::malformed_onion, "Onion comment has no installer arguments");
        }

        auto add = [&](const option_info& opt, std::optional<std::string> value, std::string_view spelled)
        {
            if (contains(disallowed_options, opt.name))
            {
                throw error(
                    errc::disallowed_flag,
                    fmt::format("Option '{}' is not allowed in onion comments: it prevents installation", spelled)
                );
            }
            if (contains(multi_requirement_options, opt.name))
            {
                throw error(
                    errc::malformed_onion,
                    fmt::format("Option '{}' is not supported: an onion comment installs exactly one requirement", spelled)
                );
            }
            spec.flags.push_back(OnionFlag{std::string(opt.name), std::move(value)});
        };

        std::vector<std::string> positionals;
        for (std::size_t i = 0; i < words.size(); ++i)
        {
            const std::string& word = words[i];
            auto take_value = [&](std::string_view spelled) -> std::string
            {
                if (i + 1 >= words.size())
                {
                    throw error(errc::malformed_onion, fmt::format("Option '{}' requires a value", spelled));
                }
                return words[++i];
            };

            if (word.starts_with("--") && word.size() > 2)
            {
                const auto eq = word.find('=');
                const std::string_view name = std::string_view(word).substr(0, eq);
                const option_info* opt = find_long(name, trimmed);
                if (opt == nullptr)
                {
                    if (eq != std::string::npos)
                    {
                        spec.flags.push_back(OnionFlag{std::string(name), word.substr(eq + 1)});
                    }
                    else
                    {
                        spec.flags.push_back(OnionFlag{word, std::nullopt});
                    }
                    continue;
                }
                if (opt->takes_value)
                {
                    add(*opt, eq != std::string::npos ? word.substr(eq + 1) : take_value(name), name);
                }
                else
                {
                    if (eq != std::string::npos)
                    {
                        throw error(errc::malformed_onion, fmt::format("Option '{}' does not take a value", name));
                    }
                    add(*opt, std::nullopt, name);
                }
            }
            else if (word.size() > 1 && word[0] == '-' && word[1] != '-')
            {
                // Short options may be bundled (-Uq) and may carry their value
                // inline (-t/dir).
                for (std::size_t k = 1; k < word.size(); ++k)
                {
                    const option_info* opt = find_short(word[k]);
                    const std::string spelled = fmt::format("-{}", word[k]);
                    if (opt == nullptr)
                    {
                        throw error(errc::malformed_onion, fmt::format("Unknown option '{}' in onion comment", spelled));
                    }
                    if (opt->takes_value)
                    {
                        add(*opt, k + 1 < word.size() ? word.substr(k + 1) : take_value(spelled), spelled);
                        break;
                    }
                    add(*opt, std::nullopt, spelled);
                }
            }
            else
            {
                positionals.push_back(word);
            }
        }

        // "name @ url" arrives as three words.
        if (positionals.size() == 3 && positionals[1] == "@")
        {
            positionals = {positionals[0] + " @ " + positionals[2]};
        }
        if (positionals.empty())
        {
            throw error(errc::malformed_onion, fmt::format("Onion comment '{}' names no requirement", trimmed));
        }
        if (positionals.size() > 1)
        {
            throw error(
                errc::malformed_onion,
                fmt::format("Onion comment '{}' names more than one requirement", trimmed)
            );
        }
        try
        {
            spec.requirement = Requirement::parse(positionals.front());
        }
        catch (const error& e)
        {
            throw error(errc::malformed_onion, e.what());
        }
        return spec;
    }

    std::string SmuggleStatement::top_level_module() const
    {
        return root_name.substr(0, root_name.find('.'));
    }

    std::vector<SmuggleStatement> SmuggleStatement::expand() const
    {
        if (form != smuggle_form::multi)
        {
            return {*this};
        }
        std::vector<SmuggleStatement> out;
        for (const auto& entry : names)
        {
            SmuggleStatement single;
            single.form = entry.alias ? smuggle_form::plain_as : smuggle_form::plain;
            single.root_name = entry.name;
            single.alias = entry.alias;
            single.line_no = line_no;
            single.indent = indent;
            out.push_back(std::move(single));
        }
        return out;
    }

    namespace
    {
        bool starts_statement(std::string_view text)
        {
            auto word_then_ident = [](std::string_view rest)
            { return !rest.empty() && (detail::is_alnum(rest.front()) || rest.front() == '_'); };

            if (text.starts_with("smuggle") && text.size() > 7 && detail::is_space(text[7]))
            {
                return word_then_ident(detail::trim(text.substr(7)));
            }
            if (text.starts_with("from") && text.size() > 4 && detail::is_space(text[4]))
            {
                auto rest = detail::trim(text.substr(4));
                const auto end = std::min(rest.size(), rest.find_first_of(" \t"));
                const auto after = detail::trim(rest.substr(end));
                return after.starts_with("smuggle")
                       && (after.size() == 7 || detail::is_space(after[7]) || after[7] == '(');
            }
            return false;
        }

        std::optional<SmuggleStatement>
        parse_code(std::string_view line, const scanned_line& scan, std::size_t line_no)
        {
            const std::string_view code = line.substr(0, std::min(scan.comment, line.size()));
            std::size_t indent_end = 0;
            while (indent_end < code.size() && (code[indent_end] == ' ' || code[indent_end] == '\t'))
            {
                ++indent_end;
            }
            std::string_view body = code.substr(indent_end);
            while (!body.empty() && detail::is_space(body.back()))
            {
                body.remove_suffix(1);
            }

            auto starts_with_word = [](std::string_view text, std::string_view word)
            { return text.starts_with(word) && (text.size() == word.size() || detail::is_space(text[word.size()])); };

            statement_lexer lex(body, line, line_no);

            // "x = 1; smuggle y": a statement that is not first on its line.
            for (const auto pos : scan.semicolons)
            {
                if (pos < code.size() && starts_statement(detail::trim(code.substr(pos + 1))))
                {
                    lex.fail("smuggle statements must be alone on their line");
                }
            }

            SmuggleStatement stmt;
            stmt.line_no = line_no;
            stmt.indent = std::string(code.substr(0, indent_end));

            if (body == "smuggle")
            {
                lex.fail("missing module name");
            }
            if (starts_with_word(body, "smuggle"))
            {
                lex.eat_word("smuggle");
                const auto next = lex.peek_ident();
                if (next.empty())
                {
                    const auto rest = detail::trim(body.substr(7));
                    if (detail::is_digit(rest.front()) || rest.front() == '.')
                    {
                        lex.fail("invalid module name");
                    }
                    // "smuggle = x", "smuggle (...)" and friends are
                    // ordinary code using the name.
                    return std::nullopt;
                }
                if (scan.has_semicolon)
                {
                    lex.fail("smuggle statements must be alone on their line");
                }
                do
                {
                    ImportedName entry;
                    entry.name = lex.dotted("a module name");
                    entry.alias = lex.maybe_alias();
                    stmt.names.push_back(std::move(entry));
                } while (lex.eat(','));
                if (!lex.at_end())
                {
                    lex.fail("unexpected text after module name");
                }
                if (stmt.names.size() == 1)
                {
                    stmt.root_name = stmt.names.front().name;
                    stmt.alias = stmt.names.front().alias;
                    stmt.form = stmt.alias ? smuggle_form::plain_as : smuggle_form::plain;
                    stmt.names.clear();
                }
                else
                {
                    stmt.form = smuggle_form::multi;
                    stmt.root_name = stmt.names.front().name;
                }
                return stmt;
            }

            if (starts_with_word(body, "from"))
            {
                // Only a statement if the third word is "smuggle".
                auto rest = detail::trim(body.substr(4));
                std::size_t end = 0;
                while (end < rest.size() && !detail::is_space(rest[end]))
                {
                    ++end;
                }
                auto after = detail::trim(rest.substr(end));
                if (!(after.starts_with("smuggle")
                      && (after.size() == 7 || detail::is_space(after[7]) || after[7] == '(')))
                {
                    return std::nullopt;
                }
                if (scan.has_semicolon)
                {
                    lex.fail("smuggle statements must be alone on their line");
                }
                lex.eat_word("from");
                if (lex.peek('.'))
                {
                    lex.fail("relative imports cannot be smuggled");
                }
                stmt.root_name = lex.dotted("a module name");
                if (!lex.eat_word("smuggle"))
                {
                    lex.fail("expected 'smuggle'");
                }
                if (lex.peek('*'))
                {
                    lex.fail("wildcard imports cannot be smuggled");
                }
                const bool parenthesized = lex.eat('(');
                do
                {
                    if (parenthesized && lex.peek(')'))
                    {
                        break;
                    }
                    ImportedName attr;
                    attr.name = lex.ident("a name to import");
                    attr.alias = lex.maybe_alias();
                    stmt.from_attrs.push_back(std::move(attr));
                } while (lex.eat(','));
                if (stmt.from_attrs.empty())
                {
                    lex.fail("missing names to import");
                }
                if (parenthesized && !lex.eat(')'))
                {
                    lex.fail("expected ')'");
                }
                if (!lex.at_end())
                {
                    lex.fail("unexpected text after imported names");
                }
                const bool aliased = std::any_of(
                    stmt.from_attrs.begin(),
                    stmt.from_attrs.end(),
                    [](const ImportedName& a) { return a.alias.has_value(); }
                );
                stmt.form = aliased ? smuggle_form::from_as : smuggle_form::from;
                return stmt;
            }
            return std::nullopt;
        }

        std::optional<SmuggleStatement>
        parse_scanned(std::string_view line, const scanned_line& scan, std::size_t line_no)
        {
            if (scan.starts_in_string)
            {
                return std::nullopt;
            }
            auto stmt = parse_code(line, scan, line_no);
            if (!stmt || scan.comment == std::string_view::npos)
            {
                return stmt;
            }
            stmt->onion = parse_onion_comment(line.substr(scan.comment), line_no);
            if (stmt->onion && stmt->form == smuggle_form::multi)
            {
                throw error(
                    errc::malformed_smuggle,
                    fmt::format(
                        "Invalid smuggle statement on line {}: onion comments cannot be combined with multiple modules",
                        line_no
                    ),
                    line_no
                );
            }
            return stmt;
        }

        std::string render_single(const SmuggleStatement& stmt)
        {
            std::string out = fmt::format("smuggle(name={}", python_string_literal(stmt.root_name));
            if (stmt.alias)
            {
                out += fmt::format(", as_={}", python_string_literal(*stmt.alias));
            }
            if (stmt.form == smuggle_form::from || stmt.form == smuggle_form::from_as)
            {
                std::vector<std::string> attrs;
                for (const auto& attr : stmt.from_attrs)
                {
                    attrs.push_back(fmt::format(
                        "({},{})",
                        python_string_literal(attr.name),
                        attr.alias ? python_string_literal(*attr.alias) : "None"
                    ));
                }
                out += fmt::format(", attrs=[{}]", detail::join(attrs, ", "));
            }
            if (stmt.onion)
            {
                out += fmt::format(", installer=\"pip\", args={})", python_string_literal(stmt.onion->raw_args));
            }
            else
            {
                out += ", installer=None, args=None)";
            }
            return out;
        }
    }

    std::optional<SmuggleStatement> parse_line(std::string_view line, std::size_t line_no)
    {
        return parse_scanned(line, scan_line(line, string_state::none), line_no);
    }

    std::string render_call(const SmuggleStatement& stmt)
    {
        std::vector<std::string> calls;
        for (const auto& single : stmt.expand())
        {
            calls.push_back(render_single(single));
        }
        return detail::join(calls, "; ");
    }

    TransformResult transform_source(std::string_view cell)
    {
        TransformResult result;
        result.source.reserve(cell.size());
        string_state state = string_state::none;
        std::size_t line_no = 0;
        std::size_t start = 0;
        while (start < cell.size())
        {
            ++line_no;
            std::size_t newline = cell.find('\n', start);
            const std::size_t end = newline == std::string_view::npos ? cell.size() : newline + 1;
            std::string_view full = cell.substr(start, end - start);
            std::string_view ending;
            std::string_view line = full;
            if (line.ends_with("\r\n"))
            {
                ending = line.substr(line.size() - 2);
                line.remove_suffix(2);
            }
            else if (line.ends_with('\n'))
            {
                ending = line.substr(line.size() - 1);
                line.remove_suffix(1);
            }

            const auto scan = scan_line(line, state);
            state = scan.end_state;
            auto stmt = parse_scanned(line, scan, line_no);
            if (stmt)
            {
                result.source += stmt->indent;
                result.source += render_call(*stmt);
                result.source += ending;
                for (auto& single : stmt->expand())
                {
                    result.statements.push_back(std::move(single));
                }
            }
            else
            {
                result.source += full;
            }
            start = end;
        }
        return result;
    }

    OnionSpec validate_onion_flags(OnionSpec spec, bool project_enabled)
    {
        for (const auto& flag : spec.flags)
        {
            if (contains(disallowed_options, flag.name))
            {
                throw error(errc::disallowed_flag, fmt::format("Option '{}' is not allowed in onion comments", flag.name));
            }
            if (project_enabled && contains(location_options, flag.name))
            {
                throw error(
                    errc::location_flag_with_project,
                    fmt::format(
                        "Option '{}' changes the install location and cannot be used while a project is active",
                        flag.name
                    )
                );
            }
        }
        return spec;
    }

    std::string python_string_literal(std::string_view text)
    {
        std::string out = "\"";
        for (char c : text)
        {
            switch (c)
            {
                case '"':
                    out += "\\\"";
                    break;
                case '\\':
                    out += "\\\\";
                    break;
                case '\n':
                    out += "\\n";
                    break;
                case '\r':
                    out += "\\r";
                    break;
                case '\t':
                    out += "\\t";
                    break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20 || c == 0x7f)
                    {
                        out += fmt::format("\\x{:02x}", static_cast<unsigned char>(c));
                    }
                    else
                    {
                        out += c;
                    }
            }
        }
        out += '"';
        return out;
    }
}
