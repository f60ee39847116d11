#include <escn/xyz.hpp>

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace escn::io {

namespace {

const std::array<std::string, 119> kSymbols = {
    "",   "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si",
    "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu",
    "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru",
    "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr",
    "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",
    "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac",
    "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf",
    "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw InputError("xyz line " + std::to_string(line) + ": " + what);
}

}  // namespace

int atomic_number(const std::string& symbol) {
  if (!symbol.empty() && std::isdigit(static_cast<unsigned char>(symbol[0]))) {
    std::size_t used = 0;
    int z = 0;
    try {
      z = std::stoi(symbol, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == symbol.size() && z >= 1 && z <= 118) return z;
    throw InputError("unknown element: " + symbol);
  }
  const std::string key = lower(symbol);
  for (int z = 1; z <= 118; ++z)
    if (lower(kSymbols[static_cast<std::size_t>(z)]) == key) return z;
  throw InputError("unknown element: " + symbol);
}

const std::string& element_symbol(int z) {
  if (z < 1 || z > 118) throw InputError("atomic number out of range");
  return kSymbols[static_cast<std::size_t>(z)];
}

XYZStructure parse_xyz(std::istream& in) {
  XYZStructure s;
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line)) fail(lineno, "missing atom count");
  long count = -1;
  {
    std::istringstream ls(line);
    std::string extra;
    if (!(ls >> count) || count < 1 || (ls >> extra)) fail(lineno, "expected a positive atom count");
  }
  ++lineno;
  if (!std::getline(in, line)) fail(lineno, "missing comment line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  s.comment = line;

  for (long i = 0; i < count; ++i) {
    ++lineno;
    if (!std::getline(in, line)) fail(lineno, "expected " + std::to_string(count) + " atoms");
    std::istringstream ls(line);
    std::string sym, tx, ty, tz;
    if (!(ls >> sym >> tx >> ty >> tz)) fail(lineno, "expected: symbol x y z");
    Vec3 p;
    const std::string* parts[3] = {&tx, &ty, &tz};
    for (int k = 0; k < 3; ++k) {
      std::size_t used = 0;
      try {
        p[k] = std::stod(*parts[k], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != parts[k]->size() || !std::isfinite(p[k]))
        fail(lineno, "bad coordinate '" + *parts[k] + "'");
    }
    int z = 0;
    try {
      z = atomic_number(sym);
    } catch (const InputError& e) {
      fail(lineno, e.what());
    }
    s.symbols.push_back(sym);
    s.atomic_numbers.push_back(z);
    s.positions.push_back(p);
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos)
      fail(lineno, "unexpected content after the last atom");
  }
  return s;
}

XYZStructure read_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return parse_xyz(in);
}

void write_xyz(std::ostream& out, const XYZStructure& s) {
  out << s.size() << "\n" << s.comment << "\n";
  char buf[128];
  for (int i = 0; i < s.size(); ++i) {
    const auto& p = s.positions[static_cast<std::size_t>(i)];
    std::snprintf(buf, sizeof buf, "%s %.17g %.17g %.17g",
                  element_symbol(s.atomic_numbers[static_cast<std::size_t>(i)]).c_str(), p.x(),
                  p.y(), p.z());
    out << buf << "\n";
  }
}

}  // namespace escn::io
