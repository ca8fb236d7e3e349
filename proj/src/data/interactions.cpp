#include "khgt/data/interactions.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "khgt/errors.hpp"

namespace khgt::data {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <typename T>
T parse_field(std::string_view token, std::size_t line, const char* what) {
  T value{};
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end || token.empty()) {
    throw ParseError(line, std::string("malformed ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::uint64_t time_slot(std::int64_t timestamp, std::int64_t resolution) {
  if (resolution <= 0) throw ContractError("time resolution must be positive");
  if (timestamp < 0) throw RangeError("negative timestamp");
  return static_cast<std::uint64_t>(timestamp / resolution);
}

void validate(const InteractionLog& log) {
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& r = log.records[i];
    if (r.user >= log.num_users || r.item >= log.num_items || r.behavior >= log.num_behaviors) {
      throw RangeError("record " + std::to_string(i) + " (" + std::to_string(r.user) + ", " + std::to_string(r.item) +
                       ", " + std::to_string(r.behavior) + ") exceeds declared counts");
    }
    if (r.timestamp < 0) throw RangeError("record " + std::to_string(i) + " has a negative timestamp");
  }
}

InteractionLog parse_interactions(std::istream& in, const LogDims& dims) {
  InteractionLog log;
  std::string raw;
  std::size_t line_no = 0;
  std::uint32_t max_user = 0, max_item = 0, max_behavior = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 tab-separated fields, got " + std::to_string(fields.size()));
    }
    InteractionRecord r;
    r.user = parse_field<std::uint32_t>(fields[0], line_no, "user id");
    r.item = parse_field<std::uint32_t>(fields[1], line_no, "item id");
    r.behavior = parse_field<std::uint32_t>(fields[2], line_no, "behavior");
    r.timestamp = parse_field<std::int64_t>(fields[3], line_no, "timestamp");
    if (r.timestamp < 0) throw ParseError(line_no, "negative timestamp");
    if (dims.users && r.user >= dims.users)
      throw RangeError("line " + std::to_string(line_no) + ": user id " + std::to_string(r.user) + " >= " +
                       std::to_string(dims.users));
    if (dims.items && r.item >= dims.items)
      throw RangeError("line " + std::to_string(line_no) + ": item id " + std::to_string(r.item) + " >= " +
                       std::to_string(dims.items));
    if (dims.behaviors && r.behavior >= dims.behaviors)
      throw RangeError("line " + std::to_string(line_no) + ": behavior " + std::to_string(r.behavior) + " >= " +
                       std::to_string(dims.behaviors));
    max_user = std::max(max_user, r.user + 1);
    max_item = std::max(max_item, r.item + 1);
    max_behavior = std::max(max_behavior, r.behavior + 1);
    log.records.push_back(r);
  }
  log.num_users = dims.users ? dims.users : max_user;
  log.num_items = dims.items ? dims.items : max_item;
  log.num_behaviors = dims.behaviors ? dims.behaviors : max_behavior;
  return log;
}

std::vector<std::uint32_t> parse_item_categories(std::istream& in, std::uint32_t num_items) {
  constexpr std::uint32_t kUnset = UINT32_MAX;
  std::vector<std::uint32_t> categories(num_items, kUnset);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw ParseError(line_no, "expected 2 tab-separated fields, got " + std::to_string(fields.size()));
    }
    const auto item = parse_field<std::uint32_t>(fields[0], line_no, "item id");
    const auto category = parse_field<std::uint32_t>(fields[1], line_no, "category");
    if (item >= num_items) {
      throw RangeError("line " + std::to_string(line_no) + ": item id " + std::to_string(item) + " >= " +
                       std::to_string(num_items));
    }
    categories[item] = category;
  }
  const auto missing = std::find(categories.begin(), categories.end(), kUnset);
  if (missing != categories.end()) {
    throw ValidationError("item " + std::to_string(missing - categories.begin()) + " has no category");
  }
  return categories;
}

void write_interactions(std::ostream& out, const InteractionLog& log) {
  for (const auto& r : log.records) {
    out << r.user << '\t' << r.item << '\t' << r.behavior << '\t' << r.timestamp << '\n';
  }
}

void write_item_categories(std::ostream& out, const std::vector<std::uint32_t>& categories) {
  for (std::size_t j = 0; j < categories.size(); ++j) out << j << '\t' << categories[j] << '\n';
}

}  // namespace khgt::data
