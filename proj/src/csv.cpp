#include "dgflow/csv.hpp"

#include <cmath>
#include <cstdio>

namespace dgflow {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw NumericalError("CsvWriter: cannot open " + path.string());
}

void CsvWriter::sep() {
    if (row_started_) out_ << ',';
    row_started_ = true;
}

void CsvWriter::field(const std::string& s) {
    sep();
    if (s.find_first_of(",\"\r\n") != std::string::npos) {
        out_ << '"';
        for (char ch : s) {
            if (ch == '"') out_ << '"';
            out_ << ch;
        }
        out_ << '"';
    } else {
        out_ << s;
    }
}

void CsvWriter::field(double v) { field(format_double(v)); }

void CsvWriter::field(long v) { field(std::to_string(v)); }

void CsvWriter::end_row() {
    out_ << "\r\n";
    row_started_ = false;
}

void CsvWriter::header(const std::vector<std::string>& names) {
    for (const auto& n : names) field(n);
    end_row();
}

}  // namespace dgflow
