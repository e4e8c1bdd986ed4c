#pragma once

#include <string>

namespace nisp::io {

std::string read_file(const std::string& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written output.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace nisp::io
