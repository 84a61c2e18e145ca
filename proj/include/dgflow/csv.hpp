#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dgflow/common.hpp"

namespace dgflow {

/// RFC-4180 CSV writer. Doubles are printed with %.17g so reruns from a
/// manifest reproduce files byte for byte.
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);

    void header(const std::vector<std::string>& names);
    void field(const std::string& s);
    void field(double v);
    void field(long v);
    void field(int v) { field(static_cast<long>(v)); }
    void end_row();

private:
    std::ofstream out_;
    bool row_started_ = false;
    void sep();
};

std::string format_double(double v);

}  // namespace dgflow
