#pragma once

#include <filesystem>
#include <string>

#include "inhomarkov/csv.hpp"

namespace test_support {

inline std::filesystem::path work_dir(const std::string& name) {
  const auto dir = std::filesystem::path(INHOMARKOV_TEST_WORKDIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                        const std::string& text) {
  const auto path = dir / name;
  inhomarkov::csv::write_text(path, text);
  return path;
}

}  // namespace test_support
