#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ksg/grid.hpp"
#include "ksg/steady.hpp"

namespace ksg {

/// Shortest round-trip text for a double ("%.17g"); nan and inf spelled out.
std::string format_double(double v);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}
    void add_row(const std::vector<double>& row);
    void add_row(const std::vector<std::string>& row);
    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::string> lines_;
};

/// i, j, x, y, value for every cell.
void write_field_csv(const std::filesystem::path& path, const ScalarField& f, const std::string& name = "value");

/// 16-bit binary PGM of the bounding box, rows top-down; exterior pixels are 0 and
/// interior values are mapped linearly onto [1, 65535].
void write_field_pgm(const std::filesystem::path& path, const ScalarField& f);

struct ProfileMetadata {
    double alpha = 0.0;
    double c = 1.0;
    double mu = 0.0;
    double lambda = 0.0;
    double residual = 0.0;
    double tau1 = 0.0;
    double resolution = 0.0;
    std::string domain;
    std::string grid_hash;
    int iterations = 0;
};

/// Writes <dir>/profile.csv (i, j, x, y, u) and <dir>/profile.json.
void write_profile(const std::filesystem::path& dir, const SteadyProfile& profile, const ProfileMetadata& meta);

/// Reads a profile written by write_profile back onto `grid` (the grid hash must match).
SteadyProfile load_profile(const std::filesystem::path& csv_path, const GridPtr& grid, ProfileMetadata* meta = nullptr);

std::string hex_hash(std::uint64_t h);

}  // namespace ksg
