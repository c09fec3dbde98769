#pragma once

#include <map>
#include <string>
#include <string_view>

namespace solcensus {

// Whole file as a string; throws std::runtime_error when unreadable.
std::string read_text_file(const std::string& path);

// Write through a sibling temporary file and rename it into place, so a
// reader never observes a partially written file.
void atomic_write_file(const std::string& path, std::string_view content);

// key = value lines; '#' starts a comment, blank lines are skipped, keys
// and values are trimmed, a repeated key keeps the last value. Lines
// without '=' are rejected.
std::map<std::string, std::string> parse_kv_config(std::string_view text);

}  // namespace solcensus
