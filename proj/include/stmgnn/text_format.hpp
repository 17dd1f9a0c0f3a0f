#pragma once

#include <string>

namespace stmgnn {

/// Shortest decimal string that round-trips the double exactly. Keeps every
/// text artifact byte-stable across runs.
std::string format_double(double v);

/// Fixed 6-significant-digit formatting for metric reports.
std::string format_sig6(double v);

double parse_double(const std::string& s);
long long parse_int(const std::string& s);

}  // namespace stmgnn
