#pragma once

#include <string>
#include <vector>

#include "vpk/grid.hpp"

namespace vpk {

// Binary snapshot: magic "VPF1", then d, Nx, Nv as little-endian int64 and
// Lx, Vmax as little-endian doubles, then the field values (velocity index
// outermost) as little-endian doubles.
void write_snapshot(const std::string& path, const PhaseField& f);
PhaseField read_snapshot(const std::string& path);

// Fixed 17-significant-digit scientific notation; doubles round-trip
// bit-exactly through this representation.
std::string format_science(double x);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vpk
