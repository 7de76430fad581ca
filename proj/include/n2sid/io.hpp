#pragma once

// Exchange formats: input/output records as CSV with a `u1,..,um,y1,..,yp`
// header (one sample per line), and models as JSON with row-major matrices.

#include "types.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace n2sid {

/// Malformed input file; `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// 17 significant digits, enough for an exact read-back of any double.
[[nodiscard]] inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return {buf, res.ptr};
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

/// Parses `u<k>` / `y<k>` and returns the kind and the 1-based index.
inline bool parse_column_name(std::string_view name, char& kind, int& idx) {
    if (name.size() < 2 || (name[0] != 'u' && name[0] != 'y'))
        return false;
    kind = name[0];
    const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
    return res.ec == std::errc() && res.ptr == name.data() + name.size() && idx >= 1;
}

} // namespace detail

inline void write_csv(std::ostream& os, const IoBatch& io) {
    const Index m = io.inputs(), p = io.outputs();
    for (Index j = 0; j < m; ++j)
        os << (j ? "," : "") << 'u' << j + 1;
    for (Index j = 0; j < p; ++j)
        os << (j || m ? "," : "") << 'y' << j + 1;
    os << '\n';
    for (Index k = 0; k < io.samples(); ++k) {
        for (Index j = 0; j < m; ++j)
            os << (j ? "," : "") << format_double(io.u(k, j));
        for (Index j = 0; j < p; ++j)
            os << (j || m ? "," : "") << format_double(io.y(k, j));
        os << '\n';
    }
}

[[nodiscard]] inline IoBatch read_csv(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    // header: skip leading blank lines
    while (std::getline(is, line)) {
        ++lineno;
        if (!detail::trim(line).empty())
            break;
    }
    if (detail::trim(line).empty())
        throw ParseError("empty file: expected a header u1,..,um,y1,..,yp", lineno);

    const auto names = detail::split_csv(line);
    Index m = 0, p = 0;
    for (const auto name : names) {
        char kind = 0;
        int idx = 0;
        if (!detail::parse_column_name(name, kind, idx))
            throw ParseError("bad column name '" + std::string(name) + "'", lineno);
        if (kind == 'u') {
            if (p > 0 || idx != m + 1)
                throw ParseError("input columns must come first as u1,u2,..", lineno);
            ++m;
        } else {
            if (idx != p + 1)
                throw ParseError("output columns must be numbered y1,y2,..", lineno);
            ++p;
        }
    }
    if (p == 0)
        throw ParseError("no output column", lineno);

    const std::size_t width = static_cast<std::size_t>(m + p);
    std::vector<double> values;
    while (std::getline(is, line)) {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != width)
            throw ParseError("expected " + std::to_string(width) + " fields, found " + std::to_string(cells.size()),
                             lineno);
        for (const auto cell : cells) {
            double v = 0.0;
            const char* first = cell.data();
            if (!cell.empty() && cell.front() == '+')
                ++first;
            const auto res = std::from_chars(first, cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw ParseError("invalid number '" + std::string(cell) + "'", lineno);
            values.push_back(v);
        }
    }
    const Index N = static_cast<Index>(values.size() / width);
    Series u(N, m), y(N, p);
    for (Index k = 0; k < N; ++k) {
        for (Index j = 0; j < m; ++j)
            u(k, j) = values[static_cast<std::size_t>(k) * width + static_cast<std::size_t>(j)];
        for (Index j = 0; j < p; ++j)
            y(k, j) = values[static_cast<std::size_t>(k) * width + static_cast<std::size_t>(m + j)];
    }
    return {std::move(u), std::move(y)};
}

inline void save_csv(const std::string& path, const IoBatch& io) {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(os, io);
    if (!os)
        throw std::runtime_error("write to '" + path + "' failed");
}

[[nodiscard]] inline IoBatch load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw ParseError("cannot open '" + path + "'", 0);
    return read_csv(is);
}

// ----------------------------------------------------------------------------

inline constexpr int model_schema_version = 1;

[[nodiscard]] inline nlohmann::json matrix_to_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < M.cols(); ++j)
            row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Row-major nested array; `cols` fixes the width of an empty matrix.
[[nodiscard]] inline Matrix matrix_from_json(const nlohmann::json& j, Index rows, Index cols, const char* name) {
    if (!j.is_array() || static_cast<Index>(j.size()) != rows)
        throw ParseError(std::string("model: '") + name + "' must have " + std::to_string(rows) + " rows", 0);
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw ParseError(std::string("model: '") + name + "' must have " + std::to_string(cols) + " columns", 0);
        for (Index c = 0; c < cols; ++c) {
            if (!row[static_cast<std::size_t>(c)].is_number())
                throw ParseError(std::string("model: '") + name + "' has a non-numeric entry", 0);
            M(i, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    }
    return M;
}

[[nodiscard]] inline nlohmann::json model_to_json(const StateSpaceModel& model, const Vector* x0 = nullptr) {
    nlohmann::json j;
    j["schema_version"] = model_schema_version;
    j["n"] = model.order();
    j["m"] = model.inputs();
    j["p"] = model.outputs();
    j["A"] = matrix_to_json(model.A);
    j["B"] = matrix_to_json(model.B);
    j["C"] = matrix_to_json(model.C);
    j["D"] = matrix_to_json(model.D);
    j["K"] = matrix_to_json(model.K);
    if (x0)
        j["x0"] = std::vector<double>(x0->data(), x0->data() + x0->size());
    return j;
}

[[nodiscard]] inline StateSpaceModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != model_schema_version)
            throw ParseError("model: unsupported schema_version", 0);
        const Index n = j.at("n").get<Index>(), m = j.at("m").get<Index>(), p = j.at("p").get<Index>();
        if (n < 0 || m < 0 || p < 1)
            throw ParseError("model: invalid dimensions", 0);
        return {matrix_from_json(j.at("A"), n, n, "A"), matrix_from_json(j.at("B"), n, m, "B"),
                matrix_from_json(j.at("C"), p, n, "C"), matrix_from_json(j.at("D"), p, m, "D"),
                matrix_from_json(j.at("K"), n, p, "K")};
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("model: ") + ex.what(), 0);
    }
}

} // namespace n2sid
