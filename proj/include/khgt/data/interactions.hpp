#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace khgt::data {

struct InteractionRecord {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::uint32_t behavior = 0;
  std::int64_t timestamp = 0;  // unix seconds, UTC

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

struct InteractionLog {
  std::vector<InteractionRecord> records;
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  std::uint32_t num_behaviors = 0;

  friend bool operator==(const InteractionLog&, const InteractionLog&) = default;
};

/// Declared id-space sizes. A zero field is inferred as max id + 1.
struct LogDims {
  std::uint32_t users = 0;
  std::uint32_t items = 0;
  std::uint32_t behaviors = 0;
};

/// Reads `user \t item \t behavior \t unix_seconds` lines. Blank lines are
/// skipped. Throws ParseError (with the line number) on malformed lines and
/// RangeError when an id exceeds a declared count.
InteractionLog parse_interactions(std::istream& in, const LogDims& dims = {});

/// Reads `item \t category` lines into a dense vector of size num_items.
/// Every item must receive a category.
std::vector<std::uint32_t> parse_item_categories(std::istream& in, std::uint32_t num_items);

void write_interactions(std::ostream& out, const InteractionLog& log);
void write_item_categories(std::ostream& out, const std::vector<std::uint32_t>& categories);

/// Throws RangeError if any record breaks the log's declared counts.
void validate(const InteractionLog& log);

/// floor(timestamp / resolution) for non-negative timestamps.
std::uint64_t time_slot(std::int64_t timestamp, std::int64_t resolution);

inline constexpr std::int64_t kSecondsPerWeek = 604800;

}  // namespace khgt::data
