#include "heurnet/data/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace heurnet::data {

namespace {

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

struct CellText {
    std::string operator()(const std::string& s) const { return quote(s); }
    std::string operator()(double v) const { return format_double(v); }
    std::string operator()(long long v) const { return std::to_string(v); }
};

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string to_csv(const Table& t) {
    std::string out;
    auto line = [&out](const auto& cells, auto&& text) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += text(cells[i]);
        }
        out += '\n';
    };
    line(t.header, [](const std::string& s) { return quote(s); });
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size())
            throw std::invalid_argument("csv row has " + std::to_string(row.size()) + " cells, header has " +
                                        std::to_string(t.header.size()));
        line(row, [](const Cell& c) { return std::visit(CellText{}, c); });
    }
    return out;
}

void write_csv(const Table& t, const std::filesystem::path& path) {
    const std::string text = to_csv(t);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace heurnet::data
