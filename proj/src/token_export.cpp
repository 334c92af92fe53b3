#include "hgtok/token_export.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hgtok/error.hpp"

namespace hgtok {

static_assert(std::endian::native == std::endian::little, "HGTOK1 I/O assumes a little-endian host");

namespace {

constexpr char kMagic[6] = {'H', 'G', 'T', 'O', 'K', '1'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) fail_data("truncated HGTOK1 header");
  return v;
}

}  // namespace

void write_token_export(std::ostream& os, const Matrix<float>& tokens) {
  os.write(kMagic, sizeof kMagic);
  put_u32(os, static_cast<std::uint32_t>(tokens.rows()));
  put_u32(os, static_cast<std::uint32_t>(tokens.cols()));
  os.write(reinterpret_cast<const char*>(tokens.data()), static_cast<std::streamsize>(tokens.size() * sizeof(float)));
  if (!os) fail_data("failed writing HGTOK1 data");
}

void write_token_export_file(const std::string& path, const Matrix<float>& tokens) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail_data("cannot open " + path + " for writing");
  write_token_export(os, tokens);
}

Matrix<float> read_token_export(std::istream& is) {
  char magic[6];
  if (!is.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0) fail_data("not an HGTOK1 token export");
  const std::uint32_t rows = get_u32(is), cols = get_u32(is);
  Matrix<float> m(rows, cols);
  if (!is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float))))
    fail_data("truncated HGTOK1 body");
  if (is.peek() != std::char_traits<char>::eof()) fail_data("trailing bytes after HGTOK1 body");
  return m;
}

Matrix<float> read_token_export_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail_data("cannot open " + path);
  return read_token_export(is);
}

}  // namespace hgtok
