#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ltc/error.hpp"
#include "ltc/tensor_file.hpp"

namespace ltc {

std::string format_hex(double v) {
    char buf[64];
    const bool neg = std::signbit(v);
    const double mag = neg ? -v : v;
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), mag, std::chars_format::hex);
    if (ec != std::errc{}) throw Error("format_hex: to_chars failed");
    std::string s(buf, end);
    if (std::isfinite(mag)) s = "0x" + s;
    return neg ? "-" + s : s;
}

std::string format_exact(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw Error("format_exact: to_chars failed");
    return std::string(buf, end);
}

double parse_double(const std::string& token) {
    std::string_view t = token;
    bool neg = false;
    if (!t.empty() && (t[0] == '-' || t[0] == '+')) {
        neg = t[0] == '-';
        t.remove_prefix(1);
    }
    double v = 0.0;
    std::from_chars_result r{};
    if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
        r = std::from_chars(t.data() + 2, t.data() + t.size(), v, std::chars_format::hex);
    } else {
        r = std::from_chars(t.data(), t.data() + t.size(), v);
    }
    if (r.ec != std::errc{} || r.ptr != t.data() + t.size() || t.empty()) {
        throw InvalidArgument("cannot parse number '" + token + "'");
    }
    return neg ? -v : v;
}

const DenseMatrix& TensorFile::tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw InvalidArgument("tensor file: missing tensor '" + name + "'");
    return it->second;
}

double TensorFile::scalar(const std::string& name) const {
    auto it = scalars.find(name);
    if (it == scalars.end()) throw InvalidArgument("tensor file: missing scalar '" + name + "'");
    return it->second;
}

void TensorFile::write(std::ostream& out) const {
    out << "ltc-tensors 1\n";
    for (const auto& [name, m] : tensors) {
        out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const auto row = m.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) out << ' ';
                out << format_hex(row[c]);
            }
            out << '\n';
        }
    }
    for (const auto& [name, v] : scalars) out << "scalar " << name << ' ' << format_hex(v) << '\n';
    out << "end\n";
}

TensorFile TensorFile::read(std::istream& in) {
    TensorFile f;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw InvalidArgument("tensor file line " + std::to_string(line_no) + ": " + what);
    };
    if (!std::getline(in, line) || line != "ltc-tensors 1") {
        line_no = 1;
        fail("bad header");
    }
    ++line_no;
    bool ended = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string kind, name;
        ls >> kind;
        if (kind == "end") {
            ended = true;
            break;
        }
        if (kind == "tensor") {
            std::size_t rows = 0, cols = 0;
            if (!(ls >> name >> rows >> cols)) fail("malformed tensor header");
            std::vector<double> data;
            data.reserve(rows * cols);
            for (std::size_t r = 0; r < rows; ++r) {
                if (!std::getline(in, line)) fail("truncated tensor '" + name + "'");
                ++line_no;
                std::istringstream rs(line);
                std::string tok;
                std::size_t n = 0;
                while (rs >> tok) {
                    data.push_back(parse_double(tok));
                    ++n;
                }
                if (n != cols) fail("expected " + std::to_string(cols) + " values");
            }
            f.tensors[name] = DenseMatrix(rows, cols, std::move(data));
        } else if (kind == "scalar") {
            std::string tok;
            if (!(ls >> name >> tok)) fail("malformed scalar");
            f.scalars[name] = parse_double(tok);
        } else {
            fail("unknown record '" + kind + "'");
        }
    }
    if (!ended) fail("missing end marker");
    return f;
}

void TensorFile::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write(out);
    if (!out) throw Error("write failed: " + path.string());
}

TensorFile TensorFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read(in);
}

void put_params(TensorFile& file, const ModelParams& params) {
    auto put_layer = [&](const std::string& prefix, const Layer& l) {
        file.tensors[prefix + ".weight"] = l.weight;
        file.tensors[prefix + ".bias"] = DenseMatrix(1, l.bias.size(), l.bias);
    };
    for (std::size_t i = 0; i < params.encoder.size(); ++i) {
        put_layer("encoder." + std::to_string(i), params.encoder[i]);
    }
    put_layer("head", params.head);
    file.scalars["encoder.layers"] = static_cast<double>(params.encoder.size());
}

ModelParams get_params(const TensorFile& file) {
    auto get_layer = [&](const std::string& prefix) {
        const DenseMatrix& b = file.tensor(prefix + ".bias");
        Layer l{file.tensor(prefix + ".weight"), Vector(b.values().begin(), b.values().end())};
        return l;
    };
    ModelParams p;
    const auto n = static_cast<std::size_t>(file.scalar("encoder.layers"));
    for (std::size_t i = 0; i < n; ++i) p.encoder.push_back(get_layer("encoder." + std::to_string(i)));
    p.head = get_layer("head");
    p.validate();
    return p;
}

}  // namespace ltc
