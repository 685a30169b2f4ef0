#include "icqed/trace.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "icqed/errors.hpp"

namespace icqed {

void ScanTrace::validate() const {
    if (x.size() != y.size())
        throw DataError("trace x/y size mismatch");
    if (x.empty())
        throw DataError("empty trace");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1]))
            throw DataError("trace x values must be strictly increasing");
    if (kind == TraceKind::counts)
        for (double v : y)
            if (v < 0.0)
                throw DataError("negative counts in trace");
    for (double v : y)
        if (!std::isfinite(v))
            throw DataError("non-finite trace value");
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_csv(std::ostream& os, const ScanTrace& trace,
               const std::string& x_header, const std::string& y_header) {
    os << x_header << ',' << y_header << '\n';
    for (std::size_t i = 0; i < trace.x.size(); ++i)
        os << format_double(trace.x[i]) << ',' << format_double(trace.y[i]) << '\n';
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return columns[i];
    throw DataError("CSV column not found: " + name);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

CsvTable read_csv(std::istream& is) {
    CsvTable table;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#')
            continue;
        auto cells = split_line(line);
        if (table.header.empty()) {
            table.header = cells;
            table.columns.assign(cells.size(), {});
            continue;
        }
        if (cells.size() != table.header.size())
            throw DataError("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(table.header.size()),
                            lineno, 1);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            try {
                std::size_t pos = 0;
                double v = std::stod(cells[i], &pos);
                if (pos != cells[i].size())
                    throw std::invalid_argument("trailing junk");
                table.columns[i].push_back(v);
            } catch (const std::exception&) {
                throw DataError("CSV cell is not a number: '" + cells[i] + "'", lineno,
                                static_cast<int>(i + 1));
            }
        }
    }
    if (table.header.empty())
        throw DataError("CSV input is empty");
    return table;
}

}  // namespace icqed
