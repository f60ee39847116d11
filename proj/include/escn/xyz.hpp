#pragma once

#include <escn/types.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace escn::io {

struct XYZStructure {
  std::string comment;
  std::vector<std::string> symbols;
  std::vector<int> atomic_numbers;
  std::vector<Vec3> positions;  // angstrom

  int size() const { return static_cast<int>(positions.size()); }
};

/// 1..118 for element symbols (case-insensitive) or plain atomic numbers;
/// throws InputError otherwise.
int atomic_number(const std::string& symbol);
const std::string& element_symbol(int z);

/// Single-frame XYZ. Errors carry the 1-based line number.
XYZStructure parse_xyz(std::istream& in);
XYZStructure read_xyz(const std::string& path);
void write_xyz(std::ostream& out, const XYZStructure& s);

}  // namespace escn::io
