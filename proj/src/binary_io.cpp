#include "binary_io.hpp"

#include <fstream>
#include <iterator>

namespace dcsr::detail {

std::string read_binary_file(const std::string& path, ErrorKind missing_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(missing_kind, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::IoError, "short write to " + path);
}

}  // namespace dcsr::detail
