#ifndef MOB_CSV_HPP
#define MOB_CSV_HPP

#include <string>
#include <vector>

namespace mob::io {

// Minimal CSV support for the repo's numeric files: comma separators, one
// header row, no quoting. Doubles are written with round-trip precision.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

std::string format_double(double v);

void write_csv(const std::string& path, const Csv& table);
Csv read_csv(const std::string& path);

}  // namespace mob::io

#endif
