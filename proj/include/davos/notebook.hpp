#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "davos/grammar.hpp"

namespace davos
{
    namespace fs = std::filesystem;

    enum class cell_kind
    {
        code,
        markdown,
        raw,
    };

    [[nodiscard]] std::string_view to_string(cell_kind kind) noexcept;

    struct NotebookCell
    {
        cell_kind kind = cell_kind::code;
        std::string source;
        std::size_t index = 0;
        // The file stored the source as a list of lines rather than one string.
        bool source_as_lines = false;
    };

    /**
     * A v4 notebook. The original bytes are kept, and rendering only rewrites
     * the `source` values of cells whose text changed, so an untouched
     * document renders byte-for-byte as it was read.
     */
    class NotebookDoc
    {
    public:

        // Throws NotANotebook or UnsupportedFormatVersion.
        static NotebookDoc parse(std::string text);

        [[nodiscard]] std::vector<NotebookCell>& cells() noexcept
        {
            return m_cells;
        }

        [[nodiscard]] const std::vector<NotebookCell>& cells() const noexcept
        {
            return m_cells;
        }

        [[nodiscard]] int format_major() const noexcept
        {
            return m_major;
        }

        [[nodiscard]] int format_minor() const noexcept
        {
            return m_minor;
        }

        [[nodiscard]] std::size_t code_cell_count() const noexcept;

        [[nodiscard]] std::string render() const;

        bool operator==(const NotebookDoc& other) const
        {
            return render() == other.render();
        }

    private:

        struct source_span
        {
            std::size_t begin = 0;
            std::size_t end = 0;
        };

        std::string m_text;
        std::vector<NotebookCell> m_cells;
        std::vector<std::string> m_original_sources;
        // One per cell when the byte scanner located every source value.
        std::optional<std::vector<source_span>> m_spans;
        int m_major = 4;
        int m_minor = 0;
    };

    [[nodiscard]] NotebookDoc load_notebook(const fs::path& path);
    void save_notebook(const NotebookDoc& doc, const fs::path& path);

    struct CellInventory
    {
        std::size_t cell_index = 0;
        std::vector<SmuggleStatement> statements;
    };

    struct NotebookTransform
    {
        NotebookDoc doc;
        // One entry per code cell, in document order.
        std::vector<CellInventory> inventory;
    };

    // Runs transform_source over every code cell. Cell magics (%%) are left
    // alone, as are line magics and shell escapes (% and ! lines). Errors
    // carry the cell index in their message.
    [[nodiscard]] NotebookTransform transform_notebook(const NotebookDoc& doc);

    // transform_source for one code cell with the magic and shell-escape
    // rules above.
    [[nodiscard]] TransformResult transform_cell(std::string_view source);

    // Splits after each '\n', keeping line endings (Python's
    // str.splitlines(keepends=True) for '\n' only).
    [[nodiscard]] std::vector<std::string> split_lines_keep_ends(std::string_view text);
}
