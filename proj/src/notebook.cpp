#include "davos/notebook.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "davos/error.hpp"
#include "strings.hpp"

namespace davos
{
    namespace
    {
        using ordered_json = nlohmann::ordered_json;

        struct scan_failure
        {
        };

        // Finds the byte range of every cells[i].source value without
        // building a tree. Gives up (nullopt) on anything unexpected, in
        // which case rendering falls back to re-serializing.
        class span_scanner
        {
        public:

            explicit span_scanner(std::string_view text)
                : m_text(text)
            {
            }

            std::optional<std::vector<std::pair<std::size_t, std::size_t>>> source_spans()
            {
                try
                {
                    return scan_document();
                }
                catch (const scan_failure&)
                {
                    return std::nullopt;
                }
            }

        private:

            char peek() const
            {
                if (m_pos >= m_text.size())
                {
                    throw scan_failure{};
                }
                return m_text[m_pos];
            }

            void expect(char c)
            {
                skip_ws();
                if (peek() != c)
                {
                    throw scan_failure{};
                }
                ++m_pos;
            }

            void skip_ws()
            {
                while (m_pos < m_text.size() && detail::is_space(m_text[m_pos]))
                {
                    ++m_pos;
                }
            }

            // m_pos at the opening quote; returns the raw contents.
            std::string_view skip_string()
            {
                const auto start = ++m_pos;
                while (peek() != '"')
                {
                    m_pos += peek() == '\\' ? 2 : 1;
                }
                return m_text.substr(start, m_pos++ - start);
            }

            void skip_value()
            {
                skip_ws();
                const char c = peek();
                if (c == '"')
                {
                    skip_string();
                    return;
                }
                if (c == '{' || c == '[')
                {
                    int depth = 0;
                    do
                    {
                        const char d = peek();
                        if (d == '"')
                        {
                            skip_string();
                            continue;
                        }
                        if (d == '{' || d == '[')
                        {
                            ++depth;
                        }
                        else if (d == '}' || d == ']')
                        {
                            --depth;
                        }
                        ++m_pos;
                    } while (depth > 0);
                    return;
                }
                while (m_pos < m_text.size() && std::string_view(",}] \t\r\n").find(m_text[m_pos]) == std::string_view::npos)
                {
                    ++m_pos;
                }
            }

            // Calls `member(key)` with m_pos at each value; `member` must
            // consume the value.
            template <typename F>
            void each_member(F&& member)
            {
                expect('{');
                skip_ws();
                if (peek() == '}')
                {
                    ++m_pos;
                    return;
                }
                while (true)
                {
                    skip_ws();
                    if (peek() != '"')
                    {
                        throw scan_failure{};
                    }
                    const auto key = skip_string();
                    expect(':');
                    skip_ws();
                    member(key);
                    skip_ws();
                    if (peek() == ',')
                    {
                        ++m_pos;
                        continue;
                    }
                    expect('}');
                    return;
                }
            }

            std::vector<std::pair<std::size_t, std::size_t>> scan_document()
            {
                std::vector<std::pair<std::size_t, std::size_t>> spans;
                bool seen_cells = false;
                each_member(
                    [&](std::string_view key)
                    {
                        if (key != "cells")
                        {
                            skip_value();
                            return;
                        }
                        seen_cells = true;
                        spans.clear();
                        scan_cells(spans);
                    }
                );
                if (!seen_cells)
                {
                    throw scan_failure{};
                }
                return spans;
            }

            void scan_cells(std::vector<std::pair<std::size_t, std::size_t>>& spans)
            {
                expect('[');
                skip_ws();
                if (peek() == ']')
                {
                    ++m_pos;
                    return;
                }
                while (true)
                {
                    std::optional<std::pair<std::size_t, std::size_t>> span;
                    each_member(
                        [&](std::string_view key)
                        {
                            const auto start = m_pos;
                            skip_value();
                            if (key == "source")
                            {
                                span.emplace(start, m_pos);
                            }
                        }
                    );
                    if (!span)
                    {
                        throw scan_failure{};
                    }
                    spans.push_back(*span);
                    skip_ws();
                    if (peek() == ',')
                    {
                        ++m_pos;
                        continue;
                    }
                    expect(']');
                    return;
                }
            }

            std::string_view m_text;
            std::size_t m_pos = 0;
        };

        [[noreturn]] void not_a_notebook(const std::string& why)
        {
            throw error(errc::not_a_notebook, fmt::format("Not a notebook: {}", why));
        }

        std::string dump_string(const std::string& text)
        {
            return ordered_json(text).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        }

        std::string indentation_at(std::string_view text, std::size_t pos)
        {
            const auto line_start = text.rfind('\n', pos);
            std::size_t i = line_start == std::string_view::npos ? 0 : line_start + 1;
            std::string indent;
            while (i < pos && (text[i] == ' ' || text[i] == '\t'))
            {
                indent += text[i++];
            }
            return indent;
        }

        // Renders a source value in the shape it had, copying the original
        // list layout when there is one.
        std::string render_source(const NotebookCell& cell, std::string_view original, std::string_view key_indent)
        {
            if (!cell.source_as_lines)
            {
                return dump_string(cell.source);
            }
            const auto lines = split_lines_keep_ends(cell.source);
            if (lines.empty())
            {
                return "[]";
            }

            std::string open_ws = fmt::format("\n{} ", key_indent);
            std::string close_ws = fmt::format("\n{}", key_indent);
            if (original.size() >= 2 && original.front() == '[')
            {
                std::size_t a = 1;
                while (a < original.size() && detail::is_space(original[a]))
                {
                    ++a;
                }
                std::size_t b = original.size() - 1;
                while (b > a && detail::is_space(original[b - 1]))
                {
                    --b;
                }
                if (a < original.size() - 1)
                {
                    open_ws = std::string(original.substr(1, a - 1));
                    close_ws = std::string(original.substr(b, original.size() - 1 - b));
                }
            }

            std::string out = "[" + open_ws;
            for (std::size_t i = 0; i < lines.size(); ++i)
            {
                if (i != 0)
                {
                    out += "," + open_ws;
                }
                out += dump_string(lines[i]);
            }
            return out + close_ws + "]";
        }

        bool is_magic_or_shell(std::string_view line)
        {
            const auto trimmed = detail::trim(line);
            return !trimmed.empty() && (trimmed.front() == '%' || trimmed.front() == '!');
        }
    }

    std::string_view to_string(cell_kind kind) noexcept
    {
        switch (kind)
        {
            case cell_kind::code:
                return "code";
            case cell_kind::markdown:
                return "markdown";
            case cell_kind::raw:
                return "raw";
        }
        return "";
    }

    std::vector<std::string> split_lines_keep_ends(std::string_view text)
    {
        std::vector<std::string> lines;
        std::size_t start = 0;
        while (start < text.size())
        {
            const auto nl = text.find('\n', start);
            const auto end = nl == std::string_view::npos ? text.size() : nl + 1;
            lines.emplace_back(text.substr(start, end - start));
            start = end;
        }
        return lines;
    }

    NotebookDoc NotebookDoc::parse(std::string text)
    {
        ordered_json root;
        try
        {
            root = ordered_json::parse(text);
        }
        catch (const nlohmann::json::exception& e)
        {
            not_a_notebook(e.what());
        }
        if (!root.is_object())
        {
            not_a_notebook("top level is not a JSON object");
        }
        const auto major = root.find("nbformat");
        if (major == root.end() || !major->is_number_integer())
        {
            not_a_notebook("missing integer 'nbformat'");
        }
        NotebookDoc doc;
        doc.m_major = major->get<int>();
        if (const auto minor = root.find("nbformat_minor"); minor != root.end() && minor->is_number_integer())
        {
            doc.m_minor = minor->get<int>();
        }
        if (doc.m_major != 4)
        {
            throw error(
                errc::unsupported_format_version,
                fmt::format("Notebook format {}.{} is not supported (only 4.x)", doc.m_major, doc.m_minor)
            );
        }
        const auto cells = root.find("cells");
        if (cells == root.end() || !cells->is_array())
        {
            not_a_notebook("missing 'cells' array");
        }

        for (std::size_t i = 0; i < cells->size(); ++i)
        {
            const auto& cell = (*cells)[i];
            if (!cell.is_object())
            {
                not_a_notebook(fmt::format("cell {} is not an object", i));
            }
            NotebookCell out;
            out.index = i;
            const auto type = cell.find("cell_type");
            if (type == cell.end() || !type->is_string())
            {
                not_a_notebook(fmt::format("cell {} has no cell_type", i));
            }
            const auto& kind = type->get_ref<const std::string&>();
            if (kind == "code")
            {
                out.kind = cell_kind::code;
            }
            else if (kind == "markdown")
            {
                out.kind = cell_kind::markdown;
            }
            else if (kind == "raw")
            {
                out.kind = cell_kind::raw;
            }
            else
            {
                not_a_notebook(fmt::format("cell {} has unknown cell_type '{}'", i, kind));
            }

            const auto source = cell.find("source");
            if (source == cell.end())
            {
                not_a_notebook(fmt::format("cell {} has no source", i));
            }
            if (source->is_string())
            {
                out.source = source->get<std::string>();
            }
            else if (source->is_array())
            {
                out.source_as_lines = true;
                for (const auto& line : *source)
                {
                    if (!line.is_string())
                    {
                        not_a_notebook(fmt::format("cell {} source holds a non-string", i));
                    }
                    out.source += line.get_ref<const std::string&>();
                }
            }
            else
            {
                not_a_notebook(fmt::format("cell {} source is neither text nor a list of lines", i));
            }
            doc.m_original_sources.push_back(out.source);
            doc.m_cells.push_back(std::move(out));
        }

        if (auto spans = span_scanner(text).source_spans(); spans && spans->size() == doc.m_cells.size())
        {
            doc.m_spans.emplace();
            for (const auto& [b, e] : *spans)
            {
                doc.m_spans->push_back({b, e});
            }
        }
        doc.m_text = std::move(text);
        return doc;
    }

    std::size_t NotebookDoc::code_cell_count() const noexcept
    {
        std::size_t n = 0;
        for (const auto& cell : m_cells)
        {
            n += cell.kind == cell_kind::code ? 1 : 0;
        }
        return n;
    }

    std::string NotebookDoc::render() const
    {
        bool changed = false;
        for (std::size_t i = 0; i < m_cells.size(); ++i)
        {
            changed = changed || m_cells[i].source != m_original_sources[i];
        }
        if (!changed)
        {
            return m_text;
        }

        if (m_spans)
        {
            std::string out = m_text;
            for (std::size_t i = m_cells.size(); i-- > 0;)
            {
                if (m_cells[i].source == m_original_sources[i])
                {
                    continue;
                }
                const auto [begin, end] = (*m_spans)[i];
                const auto original = std::string_view(m_text).substr(begin, end - begin);
                out.replace(begin, end - begin, render_source(m_cells[i], original, indentation_at(m_text, begin)));
            }
            return out;
        }

        auto root = ordered_json::parse(m_text);
        for (std::size_t i = 0; i < m_cells.size(); ++i)
        {
            const auto& cell = m_cells[i];
            if (cell.source == m_original_sources[i])
            {
                continue;
            }
            if (cell.source_as_lines)
            {
                root["cells"][i]["source"] = split_lines_keep_ends(cell.source);
            }
            else
            {
                root["cells"][i]["source"] = cell.source;
            }
        }
        return root.dump(1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
    }

    NotebookDoc load_notebook(const fs::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw error(errc::io_error, fmt::format("Cannot read {}", path.string()));
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        return NotebookDoc::parse(ss.str());
    }

    void save_notebook(const NotebookDoc& doc, const fs::path& path)
    {
        const auto text = doc.render();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out)
        {
            throw error(errc::io_error, fmt::format("Cannot write {}", path.string()));
        }
    }

    TransformResult transform_cell(std::string_view source)
    {
        auto lines = split_lines_keep_ends(source);
        for (const auto& line : lines)
        {
            if (detail::trim(line).empty())
            {
                continue;
            }
            if (detail::trim(line).starts_with("%%"))
            {
                return {std::string(source), {}};
            }
            break;
        }

        std::vector<std::size_t> masked;
        std::string text;
        for (std::size_t i = 0; i < lines.size(); ++i)
        {
            if (is_magic_or_shell(lines[i]))
            {
                masked.push_back(i);
                const auto& line = lines[i];
                text += line.ends_with("\r\n") ? "\r\n" : (line.ends_with('\n') ? "\n" : "");
            }
            else
            {
                text += lines[i];
            }
        }
        auto result = transform_source(text);
        if (masked.empty())
        {
            return result;
        }
        auto out_lines = split_lines_keep_ends(result.source);
        // A masked final line without a newline vanishes from the split.
        out_lines.resize(lines.size());
        for (auto i : masked)
        {
            out_lines[i] = lines[i];
        }
        result.source.clear();
        for (const auto& line : out_lines)
        {
            result.source += line;
        }
        return result;
    }

    NotebookTransform transform_notebook(const NotebookDoc& doc)
    {
        NotebookTransform out{doc, {}};
        for (auto& cell : out.doc.cells())
        {
            if (cell.kind != cell_kind::code)
            {
                continue;
            }
            try
            {
                auto result = transform_cell(cell.source);
                cell.source = std::move(result.source);
                out.inventory.push_back({cell.index, std::move(result.statements)});
            }
            catch (const error& e)
            {
                throw error(e.code(), fmt::format("cell {}: {}", cell.index, e.what()), e.line());
            }
        }
        return out;
    }
}
