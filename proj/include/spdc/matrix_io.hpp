#ifndef SPDC_MATRIX_IO_HPP
#define SPDC_MATRIX_IO_HPP

#include <string>

#include "spdc/matrix.hpp"

namespace spdc {

// Text format: first line "<rows> <cols>", then one line per row of
// whitespace-separated decimals. The writer emits 17 significant digits so
// a round trip is lossless.
std::string write_matrix_text(const Matrix& m);
Matrix parse_matrix_text(const std::string& text);  // IoError has line/column info

Matrix load_matrix(const std::string& path);
void save_matrix(const std::string& path, const Matrix& m);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace spdc

#endif
