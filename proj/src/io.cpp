#include "gprice/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gprice/errors.hpp"

namespace gprice {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw InvalidArgument("cannot open '" + file + "' for writing");
    return os;
}

std::ifstream open_in(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw InvalidArgument("cannot open '" + file + "' for reading");
    return is;
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& field, std::size_t line_no) {
    const char* begin = field.c_str();
    while (*begin == ' ' || *begin == '\t') ++begin;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
    if (end == begin || (end && *end != '\0') || errno == ERANGE || !std::isfinite(v)) {
        throw InvalidArgument("line " + std::to_string(line_no) + ": '" + field +
                              "' is not a finite number");
    }
    return v;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

// Rows of numbers after a one-line header, each with `columns` entries.
std::vector<std::vector<double>> read_table(std::istream& is, std::size_t* columns) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        ++line_no;
        if (blank(line)) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto fields = split_commas(line);
        if (!header_seen) {
            header_seen = true;
            if (*columns == 0) *columns = fields.size();
            if (fields.size() != *columns || fields.size() < 2) {
                throw InvalidArgument("line 1: unexpected header '" + line + "'");
            }
            continue;
        }
        if (fields.size() != *columns) {
            throw InvalidArgument("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(*columns) + " fields");
        }
        std::vector<double> row;
        for (const auto& f : fields) row.push_back(parse_number(f, line_no));
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw InvalidArgument("empty path file");
    return rows;
}

}  // namespace

void write_path_csv(std::ostream& os, const SampledPath& path) {
    os << "time,value\n";
    for (std::size_t i = 0; i < path.size(); ++i) {
        os << fmt17(path.time(i)) << ',' << fmt17(path.value(i)) << '\n';
    }
}

void write_path_csv(const std::string& file, const SampledPath& path) {
    auto os = open_out(file);
    write_path_csv(os, path);
}

SampledPath read_path_csv(std::istream& is, bool positive) {
    std::size_t columns = 2;
    const auto rows = read_table(is, &columns);
    std::vector<double> t, v;
    for (const auto& r : rows) {
        t.push_back(r[0]);
        v.push_back(r[1]);
    }
    return SampledPath(std::move(t), std::move(v), positive);
}

SampledPath read_path_csv(const std::string& file, bool positive) {
    auto is = open_in(file);
    try {
        return read_path_csv(is, positive);
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(file + ": " + e.what());
    }
}

void write_ensemble_csv(std::ostream& os, const std::vector<SampledPath>& paths) {
    if (paths.empty()) throw InvalidArgument("ensemble is empty");
    const auto t = paths.front().times();
    for (const auto& p : paths) {
        if (!std::equal(t.begin(), t.end(), p.times().begin(), p.times().end())) {
            throw InvalidArgument("ensemble paths must share one time grid");
        }
    }
    os << "time";
    for (std::size_t k = 0; k < paths.size(); ++k) os << ",path_" << k;
    os << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
        os << fmt17(t[i]);
        for (const auto& p : paths) os << ',' << fmt17(p.value(i));
        os << '\n';
    }
}

void write_ensemble_csv(const std::string& file, const std::vector<SampledPath>& paths) {
    auto os = open_out(file);
    write_ensemble_csv(os, paths);
}

std::vector<SampledPath> read_ensemble_csv(std::istream& is) {
    std::size_t columns = 0;
    const auto rows = read_table(is, &columns);
    std::vector<double> t;
    std::vector<std::vector<double>> v(columns - 1);
    for (const auto& r : rows) {
        t.push_back(r[0]);
        for (std::size_t k = 1; k < columns; ++k) v[k - 1].push_back(r[k]);
    }
    std::vector<SampledPath> out;
    for (auto& col : v) out.emplace_back(t, std::move(col));
    return out;
}

void write_surface_matrix(std::ostream& os, const PriceSurface& surface) {
    os << "time";
    for (double x : surface.space_nodes()) os << ',' << fmt17(x);
    os << '\n';
    const auto times = surface.times();
    for (std::size_t i = 0; i < times.size(); ++i) {
        os << fmt17(times[i]);
        for (double v : surface.slice(i)) os << ',' << fmt17(v);
        os << '\n';
    }
}

void write_surface_matrix(const std::string& file, const PriceSurface& surface) {
    auto os = open_out(file);
    write_surface_matrix(os, surface);
}

}  // namespace gprice
