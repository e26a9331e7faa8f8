#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace fmrigen {

std::string sha256_hex(const void* data, size_t len);
std::string sha256_file_hex(const std::filesystem::path& path);

} // namespace fmrigen
