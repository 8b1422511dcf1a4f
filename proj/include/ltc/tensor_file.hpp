#pragma once
// Named-matrix checkpoint format.
//
// Text, one record per block, values written as C99 hexadecimal floats so a
// save/load round trip is bit-exact:
//
//   ltc-tensors 1
//   tensor <name> <rows> <cols>
//   <row 0: cols hex values separated by single spaces>
//   ...
//   scalar <name> <hex value>
//   end
//
// Names contain no whitespace. Records appear in name order.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "ltc/dense.hpp"
#include "ltc/neuralcore.hpp"

namespace ltc {

struct TensorFile {
    std::map<std::string, DenseMatrix> tensors;
    std::map<std::string, double> scalars;

    const DenseMatrix& tensor(const std::string& name) const;
    double scalar(const std::string& name) const;

    void write(std::ostream& out) const;
    static TensorFile read(std::istream& in);

    void save(const std::filesystem::path& path) const;
    static TensorFile load(const std::filesystem::path& path);

    bool operator==(const TensorFile&) const = default;
};

// Stores params as encoder.<i>.weight / encoder.<i>.bias / head.weight /
// head.bias; biases are 1 x n tensors.
void put_params(TensorFile& file, const ModelParams& params);
ModelParams get_params(const TensorFile& file);

std::string format_hex(double v);
// Shortest decimal that round-trips to the same double.
std::string format_exact(double v);
double parse_double(const std::string& token);

}  // namespace ltc
