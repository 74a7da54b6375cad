#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "trace/trajectory.hpp"

namespace trace {

inline constexpr std::string_view kTrajectorySchema = "trace.trajectory/1";

// One item per line. Every record is validated; the first malformed line
// raises ParseError (with its line number) and the first invariant violation
// raises ValidationError (with item_id and field). Blank lines are skipped.
std::vector<ArchiveItem> read_trajectory_archive(const std::string& path);
std::vector<ArchiveItem> parse_trajectory_archive(std::string_view text);
ArchiveItem parse_archive_line(std::string_view line, std::size_t line_number);

// Deterministic: stable key order, 17 significant digits, '\n' after every
// record. An empty sequence produces an empty file.
void write_trajectory_archive(const std::vector<ArchiveItem>& items, const std::string& path);
std::string serialize_archive_item(const ArchiveItem& item);

}  // namespace trace
