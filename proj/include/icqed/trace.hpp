#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace icqed {

enum class TraceKind { counts, normalized };

// Ordered scan samples. x is a detuning (rad/s) or a delay (s) depending on
// the producer; y holds detected counts or a normalized reflectivity.
struct ScanTrace {
    std::vector<double> x;
    std::vector<double> y;
    TraceKind kind = TraceKind::normalized;
    std::uint64_t seed = 0;
    std::string provenance;

    // x strictly monotone, sizes equal, counts nonnegative
    void validate() const;
};

// Two-column CSV with a header row. Doubles are printed with enough digits
// to round-trip, so identical traces serialize byte-identically.
void write_csv(std::ostream& os, const ScanTrace& trace,
               const std::string& x_header, const std::string& y_header);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;  // column-major

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    const std::vector<double>& column(const std::string& name) const;  // DataError if absent
};

// Strict comma-separated numeric table; throws DataError with line/column
// diagnostics on malformed input.
CsvTable read_csv(std::istream& is);

std::string format_double(double v);

}  // namespace icqed
