#include "spdc/matrix_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spdc/error.hpp"

namespace spdc {

std::string write_matrix_text(const Matrix& m) {
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  char buf[64];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.at(i, j));
      if (j) out += " ";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

Matrix parse_matrix_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("matrix file line 1: empty file");
  std::istringstream header(line);
  long rows = 0, cols = 0;
  if (!(header >> rows >> cols) || rows < 1 || cols < 1)
    throw IoError("matrix file line 1: expected \"<rows> <cols>\" with positive counts");

  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(rows * cols));
  int lineno = 1;
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line))
      throw IoError("matrix file line " + std::to_string(lineno + 1) + ": missing row " +
                    std::to_string(i + 1));
    ++lineno;
    std::istringstream ls(line);
    for (long j = 0; j < cols; ++j) {
      double v = 0.0;
      if (!(ls >> v))
        throw IoError("matrix file line " + std::to_string(lineno) + ", column " +
                      std::to_string(j + 1) + ": expected a decimal literal");
      data.push_back(v);
    }
    double extra;
    if (ls >> extra)
      throw IoError("matrix file line " + std::to_string(lineno) + ": row " +
                    std::to_string(i + 1) + " has more than " + std::to_string(cols) +
                    " entries");
  }
  try {
    return Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                  std::move(data));
  } catch (const Error& e) {
    throw IoError(std::string("matrix file: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open \"" + path + "\" for reading");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open \"" + path + "\" for writing");
  out << content;
  if (!out) throw IoError("write to \"" + path + "\" failed");
}

Matrix load_matrix(const std::string& path) {
  try {
    return parse_matrix_text(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_matrix(const std::string& path, const Matrix& m) {
  write_file(path, write_matrix_text(m));
}

}  // namespace spdc
