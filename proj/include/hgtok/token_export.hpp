#pragma once

// HGTOK1 token export: magic "HGTOK1", little-endian u32 L, u32 d_llm, then
// L * d_llm float32 values row-major.

#include <iosfwd>
#include <string>

#include "hgtok/tensor.hpp"

namespace hgtok {

void write_token_export(std::ostream& os, const Matrix<float>& tokens);
void write_token_export_file(const std::string& path, const Matrix<float>& tokens);
Matrix<float> read_token_export(std::istream& is);
Matrix<float> read_token_export_file(const std::string& path);

}  // namespace hgtok
