#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

// Comma-separated output: header row, '.' decimals, LF endings, floats to 6
// significant digits.
namespace heurnet::data {

using Cell = std::variant<std::string, double, long long>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;
};

std::string format_double(double v);
std::string to_csv(const Table& t);
void write_csv(const Table& t, const std::filesystem::path& path);

}  // namespace heurnet::data
