#include "doaopt/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "doaopt/version.hpp"

namespace doaopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v) {
    if (std::isinf(v)) {
        if (v < 0) throw IoError("cannot serialize -inf");
        return "inf";
    }
    if (std::isnan(v)) throw IoError("cannot serialize NaN");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& token, const char* what) {
    if (token == "inf") return kInf;
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        throw IoError(std::string("malformed ") + what + ": " + token);
    }
    if (used != token.size()) {
        throw IoError(std::string("malformed ") + what + ": " + token);
    }
    return v;
}

long parse_long(const std::string& token, const char* what) {
    size_t used = 0;
    long v = 0;
    try {
        v = std::stol(token, &used);
    } catch (const std::exception&) {
        throw IoError(std::string("malformed ") + what + ": " + token);
    }
    if (used != token.size()) {
        throw IoError(std::string("malformed ") + what + ": " + token);
    }
    return v;
}

void emit_comment(std::ostream& os, const std::string& comment) {
    if (comment.empty()) return;
    if (comment.front() == '#') {
        os << comment << '\n';
    } else {
        os << "# " << comment << '\n';
    }
}

// Reads the next line that is neither empty nor a '#' comment.
bool next_content_line(std::istream& is, std::string& line) {
    while (std::getline(is, line)) {
        size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos) continue;
        if (line[start] == '#') continue;
        if (start > 0 || line.back() == '\r') {
            size_t end = line.find_last_not_of(" \t\r");
            line = line.substr(start, end - start + 1);
        }
        return true;
    }
    return false;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

}  // namespace

unsigned long long fnv1a64(const std::string& bytes) {
    unsigned long long h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string provenance_comment(const std::string& config_text) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "# %s %s config=%016llx", kToolName,
                  kVersion, fnv1a64(config_text));
    return buf;
}

void write_generator(std::ostream& os, const Generator& gen,
                     const std::string& comment) {
    emit_comment(os, comment);
    const auto& m = gen.matrix;
    os << "GEN " << gen.grid.dim() << ' ' << gen.size() << ' ' << m.nonZeros()
       << '\n';
    for (long col = 0; col < m.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, col); it; ++it) {
            os << it.row() << ' ' << col << ' ' << format_double(it.value())
               << '\n';
        }
    }
    for (long j = 0; j < gen.size(); ++j) {
        os << "LEAK " << j << ' ' << format_double(gen.leak[j]) << '\n';
    }
    if (!os) throw IoError("failed writing generator");
}

Generator read_generator(std::istream& is, const Grid& grid) {
    std::string line;
    if (!next_content_line(is, line)) throw IoError("missing GEN header");
    auto tok = split_ws(line);
    if (tok.size() != 4 || tok[0] != "GEN") throw IoError("malformed GEN header");
    const long d = parse_long(tok[1], "GEN header");
    const long n = parse_long(tok[2], "GEN header");
    const long nnz = parse_long(tok[3], "GEN header");
    if (d != grid.dim() || n != grid.cell_count()) {
        throw IoError("generator file does not match the grid");
    }
    if (nnz < 0) throw IoError("malformed GEN header");

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nnz);
    for (long e = 0; e < nnz; ++e) {
        if (!next_content_line(is, line)) throw IoError("truncated GEN entries");
        tok = split_ws(line);
        if (tok.size() != 3) throw IoError("malformed GEN entry: " + line);
        const long row = parse_long(tok[0], "GEN index");
        const long col = parse_long(tok[1], "GEN index");
        if (row < 0 || row >= n || col < 0 || col >= n) {
            throw IoError("GEN entry index out of range: " + line);
        }
        trips.emplace_back(static_cast<int>(row), static_cast<int>(col),
                           parse_double(tok[2], "GEN value"));
    }

    Generator gen;
    gen.grid = grid;
    gen.leak = Eigen::VectorXd::Zero(n);
    std::vector<bool> seen(n, false);
    for (long j = 0; j < n; ++j) {
        if (!next_content_line(is, line)) throw IoError("truncated LEAK entries");
        tok = split_ws(line);
        if (tok.size() != 3 || tok[0] != "LEAK") {
            throw IoError("malformed LEAK entry: " + line);
        }
        const long cell = parse_long(tok[1], "LEAK index");
        if (cell < 0 || cell >= n || seen[cell]) {
            throw IoError("LEAK entry index invalid: " + line);
        }
        seen[cell] = true;
        gen.leak[cell] = parse_double(tok[2], "LEAK value");
    }

    gen.matrix.resize(n, n);
    gen.matrix.setFromTriplets(trips.begin(), trips.end());
    gen.matrix.makeCompressed();
    if (gen.matrix.nonZeros() != nnz) {
        throw IoError("GEN entries contain duplicates");
    }
    return gen;
}

void write_field(std::ostream& os, const CellField& field,
                 const std::string& comment) {
    emit_comment(os, comment);
    const Grid& grid = field.grid;
    if (field.values.size() != grid.cell_count()) {
        throw IoError("field length does not match its grid");
    }
    os << "FIELD " << grid.dim();
    for (int r : grid.resolution()) os << ' ' << r;
    for (int k = 0; k < grid.dim(); ++k) {
        os << ' ' << format_double(grid.box().lo[k]) << ' '
           << format_double(grid.box().hi[k]);
    }
    os << ' ' << to_string(field.tag) << '\n';
    for (long i = 0; i < field.values.size(); ++i) {
        os << format_double(field.values[i]) << '\n';
    }
    if (!os) throw IoError("failed writing field");
}

CellField read_field(std::istream& is) {
    std::string line;
    if (!next_content_line(is, line)) throw IoError("missing FIELD header");
    auto tok = split_ws(line);
    if (tok.size() < 2 || tok[0] != "FIELD") {
        throw IoError("malformed FIELD header");
    }
    const int d = static_cast<int>(parse_long(tok[1], "FIELD header"));
    if (d < 1 || static_cast<int>(tok.size()) != 2 + d + 2 * d + 1) {
        throw IoError("malformed FIELD header");
    }
    std::vector<int> res(d);
    for (int k = 0; k < d; ++k) {
        res[k] = static_cast<int>(parse_long(tok[2 + k], "FIELD resolution"));
    }
    Box box;
    box.lo.resize(d);
    box.hi.resize(d);
    for (int k = 0; k < d; ++k) {
        box.lo[k] = parse_double(tok[2 + d + 2 * k], "FIELD bound");
        box.hi[k] = parse_double(tok[2 + d + 2 * k + 1], "FIELD bound");
    }
    CellField field;
    field.grid = build_grid(box, res);
    field.tag = field_tag_from_string(tok.back());
    field.values.resize(field.grid.cell_count());
    for (long i = 0; i < field.grid.cell_count(); ++i) {
        if (!next_content_line(is, line)) throw IoError("truncated FIELD values");
        field.values[i] = parse_double(line, "FIELD value");
    }
    return field;
}

void write_trace(std::ostream& os, const OptTrace& trace,
                 const std::string& comment) {
    emit_comment(os, comment);
    const long r = trace.records.empty() ? 0 : trace.records.front().b.size();
    os << "k";
    for (long l = 1; l <= r; ++l) os << ",b_" << l;
    os << ",f,grad_norm,g,projected,deadband,seconds\n";
    char buf[32];
    for (const OptRecord& rec : trace.records) {
        os << rec.k;
        for (long l = 0; l < r; ++l) os << ',' << format_double(rec.b[l]);
        os << ',' << format_double(rec.f);
        os << ',' << format_double(rec.grad_norm);
        if (std::isnan(rec.g)) {
            os << ",nan";
        } else {
            os << ',' << format_double(rec.g);
        }
        os << ',' << (rec.projected ? 1 : 0);
        os << ',' << (rec.deadband ? 1 : 0);
        std::snprintf(buf, sizeof(buf), "%.6f", rec.seconds);
        os << ',' << buf << '\n';
    }
    if (!os) throw IoError("failed writing trace");
}

void write_parameters(std::ostream& os, const Eigen::VectorXd& b,
                      const std::string& comment) {
    emit_comment(os, comment);
    for (long l = 0; l < b.size(); ++l) os << format_double(b[l]) << '\n';
    if (!os) throw IoError("failed writing parameters");
}

Eigen::VectorXd read_parameters(std::istream& is) {
    std::vector<double> values;
    std::string line;
    while (next_content_line(is, line)) {
        for (const auto& tok : split_ws(line)) {
            values.push_back(parse_double(tok, "parameter"));
        }
    }
    Eigen::VectorXd b(values.size());
    for (size_t i = 0; i < values.size(); ++i) b[i] = values[i];
    return b;
}

}  // namespace doaopt
