#include "vpk/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vpk {

static_assert(std::endian::native == std::endian::little,
              "snapshot format is little-endian; byte swapping not implemented");

namespace {

void put_i64(std::ostream& s, std::int64_t v) {
  s.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& s, double v) {
  s.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::int64_t get_i64(std::istream& s) {
  std::int64_t v = 0;
  s.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

double get_f64(std::istream& s) {
  double v = 0.0;
  s.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void write_snapshot(const std::string& path, const PhaseField& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write("VPF1", 4);
  put_i64(out, f.grid.d);
  put_i64(out, f.grid.Nx);
  put_i64(out, f.grid.Nv);
  put_f64(out, f.grid.Lx);
  put_f64(out, f.grid.Vmax);
  out.write(reinterpret_cast<const char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

PhaseField read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VPF1", 4) != 0)
    throw IoError("not a VPF1 snapshot: " + path);
  const std::int64_t d = get_i64(in);
  const std::int64_t Nx = get_i64(in);
  const std::int64_t Nv = get_i64(in);
  const double Lx = get_f64(in);
  const double Vmax = get_f64(in);
  if (!in) throw IoError("truncated header: " + path);
  PhaseField f(build_grid(static_cast<int>(d), static_cast<int>(Nx),
                          static_cast<int>(Nv), Lx, Vmax));
  in.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != f.values.size() * sizeof(double))
    throw IoError("truncated payload: " + path);
  return f;
}

std::string format_science(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << ',';
    out << table.columns[c];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw IoError("csv row width mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_science(row[c]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty csv: " + path);
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("bad csv number '" + cell + "' in " + path);
      }
    }
    if (row.size() != table.columns.size())
      throw IoError("csv row width mismatch in " + path);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace vpk
