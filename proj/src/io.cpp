#include "ksg/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ksg {

namespace fs = std::filesystem;

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex_hash(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void CsvWriter::add_row(const std::vector<double>& row) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (double v : row) {
        cells.push_back(format_double(v));
    }
    add_row(cells);
}

void CsvWriter::add_row(const std::vector<std::string>& row) {
    if (row.size() != header_.size()) {
        throw std::invalid_argument("CsvWriter: row has " + std::to_string(row.size()) + " cells, header has " +
                                    std::to_string(header_.size()));
    }
    std::string line;
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (k > 0) {
            line += ',';
        }
        line += row[k];
    }
    lines_.push_back(std::move(line));
}

std::string CsvWriter::str() const {
    std::string out;
    for (std::size_t k = 0; k < header_.size(); ++k) {
        if (k > 0) {
            out += ',';
        }
        out += header_[k];
    }
    out += '\n';
    for (const auto& l : lines_) {
        out += l;
        out += '\n';
    }
    return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    os << text;
    if (!os) {
        throw std::runtime_error("write to " + path.string() + " failed");
    }
}

}  // namespace

void CsvWriter::write(const fs::path& path) const { write_text(path, str()); }

void write_field_csv(const fs::path& path, const ScalarField& f, const std::string& name) {
    CsvWriter w({"i", "j", "x", "y", name});
    const MaskedGrid& g = *f.grid();
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto& c = g.cell(k);
        w.add_row(std::vector<std::string>{std::to_string(c.i), std::to_string(c.j), format_double(c.x),
                                           format_double(c.y), format_double(f[k])});
    }
    w.write(path);
}

void write_field_pgm(const fs::path& path, const ScalarField& f) {
    const MaskedGrid& g = *f.grid();
    const int nx = g.nx();
    const int ny = g.ny();
    const double lo = f.min();
    const double hi = f.max();
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<unsigned char> pixels(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * 2, 0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto& c = g.cell(k);
        const double s = std::isfinite(f[k]) ? (f[k] - lo) / span : 0.0;
        const auto level = static_cast<unsigned>(std::lround(1.0 + s * 65534.0));
        const std::size_t row = static_cast<std::size_t>(ny - 1 - c.j);
        const std::size_t at = 2 * (row * static_cast<std::size_t>(nx) + static_cast<std::size_t>(c.i));
        pixels[at] = static_cast<unsigned char>(level >> 8);
        pixels[at + 1] = static_cast<unsigned char>(level & 0xffu);
    }
    std::string text = "P5\n" + std::to_string(nx) + " " + std::to_string(ny) + "\n65535\n";
    text.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    write_text(path, text);
}

void write_profile(const fs::path& dir, const SteadyProfile& profile, const ProfileMetadata& meta) {
    write_field_csv(dir / "profile.csv", profile.u, "u");
    nlohmann::ordered_json j;
    j["alpha"] = meta.alpha;
    j["c"] = meta.c;
    j["mu"] = meta.mu;
    j["lambda"] = meta.lambda;
    j["residual"] = meta.residual;
    if (std::isfinite(meta.tau1)) {
        j["tau1"] = meta.tau1;
    } else {
        j["tau1"] = nullptr;
    }
    j["iterations"] = meta.iterations;
    j["resolution"] = meta.resolution;
    j["domain"] = meta.domain;
    j["grid_hash"] = meta.grid_hash;
    write_text(dir / "profile.json", j.dump(2) + "\n");
}

SteadyProfile load_profile(const fs::path& csv_path, const GridPtr& grid, ProfileMetadata* meta) {
    fs::path json_path = csv_path;
    json_path.replace_extension(".json");
    std::ifstream js(json_path);
    if (!js) {
        throw std::runtime_error("load_profile: missing sidecar " + json_path.string());
    }
    nlohmann::json j;
    try {
        js >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_profile: " + json_path.string() + ": " + e.what());
    }
    const std::string want = hex_hash(grid->hash());
    const std::string have = j.value("grid_hash", std::string());
    if (have != want) {
        throw std::runtime_error("load_profile: grid hash " + have + " in " + json_path.string() +
                                 " does not match the configured grid " + want);
    }
    std::ifstream is(csv_path);
    if (!is) {
        throw std::runtime_error("load_profile: cannot open " + csv_path.string());
    }
    SteadyProfile p{ScalarField(grid, BoundaryRole::Dirichlet)};
    std::vector<bool> seen(grid->size(), false);
    std::string line;
    std::getline(is, line);
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string a, b, x, y, u;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, x, ',') ||
            !std::getline(ls, y, ',') || !std::getline(ls, u, ',')) {
            throw std::runtime_error("load_profile: " + csv_path.string() + ":" + std::to_string(lineno) +
                                     ": expected 5 columns");
        }
        const int k = grid->index(std::stoi(a), std::stoi(b));
        if (k < 0) {
            throw std::runtime_error("load_profile: " + csv_path.string() + ":" + std::to_string(lineno) +
                                     ": cell outside the grid");
        }
        p.u[static_cast<std::size_t>(k)] = std::stod(u);
        seen[static_cast<std::size_t>(k)] = true;
    }
    for (bool s : seen) {
        if (!s) {
            throw std::runtime_error("load_profile: " + csv_path.string() + " does not cover every cell");
        }
    }
    p.mu = j.at("mu").get<double>();
    p.lambda = j.at("lambda").get<double>();
    p.residual = j.at("residual").get<double>();
    p.iterations = j.value("iterations", 0);
    if (j.contains("tau1") && j["tau1"].is_number()) {
        p.tau1 = j["tau1"].get<double>();
    }
    if (meta != nullptr) {
        meta->alpha = j.value("alpha", 0.0);
        meta->c = j.value("c", 1.0);
        meta->mu = p.mu;
        meta->lambda = p.lambda;
        meta->residual = p.residual;
        meta->tau1 = p.tau1;
        meta->resolution = j.value("resolution", 0.0);
        meta->domain = j.value("domain", std::string());
        meta->grid_hash = have;
        meta->iterations = p.iterations;
    }
    return p;
}

}  // namespace ksg
