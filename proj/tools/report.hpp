#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace scerm_cli {

std::string sha256_hex(const std::string& bytes);

// shortest text that round-trips: 17 significant digits, nan/inf spelled out
std::string fmt(double x);

class Csv {
 public:
  Csv(const std::string& digest, std::uint64_t seed, std::vector<std::string> columns);
  Csv& add(std::vector<std::string> cells);
  std::string str() const { return text_; }

 private:
  size_t width_;
  std::string text_;
};

// Writes to a temporary sibling file and renames it over the target.
// Throws std::ios_base::failure naming the path on error.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

}  // namespace scerm_cli
