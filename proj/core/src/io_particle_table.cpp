#include "crackfield/io/particle_table.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "crackfield/errors.hpp"

namespace crackfield {

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line, const std::string& where) {
    if (line.find('\r') != std::string::npos) {
        throw IoError(where + ": CR byte found; tables must use LF line endings");
    }
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw IoError(where + ": not a number: '" + s + "'");
    }
    return v;
}

std::int64_t parse_id(const std::string& s, const std::string& where) {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw IoError(where + ": not an integer id: '" + s + "'");
    }
    return v;
}

std::string location(const std::string& path, std::size_t line_no) {
    return path + ":" + std::to_string(line_no);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path);
    return buf.str();
}

// split into lines on LF; a trailing LF does not produce an empty final line
std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t lf = text.find('\n', start);
        if (lf == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, lf - start));
        start = lf + 1;
    }
    return lines;
}

} // namespace

ParticleTable read_particle_table(const std::string& path) {
    const std::vector<std::string> lines = split_lines(read_text(path));
    if (lines.empty()) throw IoError(path + ": empty file, header row required");

    static const std::vector<std::string> kFixed = {"id", "Xx", "Xy", "Xz", "xx", "xy", "xz"};
    const std::vector<std::string> header = split_fields(lines[0], location(path, 1));
    if (header.size() < kFixed.size()) {
        throw IoError(location(path, 1) + ": header has " + std::to_string(header.size()) +
                      " columns, expected at least " + std::to_string(kFixed.size()));
    }
    for (std::size_t c = 0; c < kFixed.size(); ++c) {
        if (header[c] != kFixed[c]) {
            throw IoError(location(path, 1) + ": header column " + std::to_string(c + 1) +
                          " is '" + header[c] + "', expected '" + kFixed[c] + "'");
        }
    }

    ParticleTable table;
    std::size_t next = kFixed.size();
    if (next < header.size() && header[next] == "quality") {
        table.has_quality = true;
        ++next;
    }
    for (; next < header.size(); ++next) {
        if (header[next].empty()) {
            throw IoError(location(path, 1) + ": empty label column name");
        }
        table.label_names.push_back(header[next]);
    }
    table.label_columns.resize(table.label_names.size());
    const std::size_t arity =
        kFixed.size() + (table.has_quality ? 1 : 0) + table.label_names.size();

    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const std::string where = location(path, ln + 1);
        if (lines[ln].empty()) throw IoError(where + ": empty line inside table");
        const std::vector<std::string> f = split_fields(lines[ln], where);
        if (f.size() != arity) {
            throw IoError(where + ": " + std::to_string(f.size()) + " fields, expected " +
                          std::to_string(arity));
        }
        ParticleTrack t;
        t.id = parse_id(f[0], where);
        t.X = {parse_double(f[1], where), parse_double(f[2], where), parse_double(f[3], where)};
        t.x = {parse_double(f[4], where), parse_double(f[5], where), parse_double(f[6], where)};
        std::size_t c = kFixed.size();
        if (table.has_quality) t.quality = parse_double(f[c++], where);
        for (std::size_t l = 0; l < table.label_names.size(); ++l) {
            table.label_columns[l].push_back(parse_double(f[c++], where));
        }
        table.tracks.push_back(t);
    }
    return table;
}

void write_particle_table(const ParticleTable& table, const std::string& path) {
    for (const auto& col : table.label_columns) {
        if (col.size() != table.tracks.size()) {
            throw InvalidInputError("write_particle_table: label column length mismatch");
        }
    }
    if (table.label_columns.size() != table.label_names.size()) {
        throw InvalidInputError("write_particle_table: label name/column count mismatch");
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);

    out << "id,Xx,Xy,Xz,xx,xy,xz";
    if (table.has_quality) out << ",quality";
    for (const std::string& name : table.label_names) out << ',' << name;
    out << '\n';

    for (std::size_t r = 0; r < table.tracks.size(); ++r) {
        const ParticleTrack& t = table.tracks[r];
        out << t.id << ',' << fmt9(t.X.x) << ',' << fmt9(t.X.y) << ',' << fmt9(t.X.z) << ','
            << fmt9(t.x.x) << ',' << fmt9(t.x.y) << ',' << fmt9(t.x.z);
        if (table.has_quality) out << ',' << fmt9(t.quality);
        for (const auto& col : table.label_columns) out << ',' << fmt9(col[r]);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

NumericTable read_numeric_table(const std::string& path) {
    const std::vector<std::string> lines = split_lines(read_text(path));
    if (lines.empty()) throw IoError(path + ": empty file, header row required");

    NumericTable table;
    table.columns = split_fields(lines[0], location(path, 1));
    for (const std::string& name : table.columns) {
        if (name.empty()) throw IoError(location(path, 1) + ": empty column name");
    }

    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const std::string where = location(path, ln + 1);
        if (lines[ln].empty()) throw IoError(where + ": empty line inside table");
        const std::vector<std::string> f = split_fields(lines[ln], where);
        if (f.size() != table.columns.size()) {
            throw IoError(where + ": " + std::to_string(f.size()) + " fields, expected " +
                          std::to_string(table.columns.size()));
        }
        std::vector<double> row;
        row.reserve(f.size());
        for (const std::string& s : f) row.push_back(parse_double(s, where));
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_numeric_table(const NumericTable& table, const std::string& path) {
    if (table.columns.empty()) throw InvalidInputError("write_numeric_table: no columns");
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) {
            throw InvalidInputError("write_numeric_table: row arity mismatch");
        }
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);

    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        out << (c > 0 ? "," : "") << table.columns[c];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << (c > 0 ? "," : "") << fmt9(row[c]);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace crackfield
