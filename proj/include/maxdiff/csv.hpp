#pragma once
// RFC-4180 CSV plus the items and responses file schemas.
//
// Items:     id,label,description
// Responses: respondent_id,version,screen,shown,best,worst,attributes
//            shown = ids joined by '|', worst may be empty,
//            attributes = key=value pairs joined by ';'
//
// Lines starting with '#' before the header are treated as metadata comments.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maxdiff/domain.hpp"

namespace maxdiff::csv {

using Row = std::vector<std::string>;

// Parses a whole document. Quoted fields may contain commas, doubled quotes
// and line breaks. Throws invalid-input on an unterminated quote.
std::vector<Row> parse(std::string_view text);

std::string quote_field(std::string_view field);
std::string format_row(std::span<const std::string> fields);

// Leading '#' lines of a document (without the '#').
std::vector<std::string> leading_comments(std::string_view text);

std::vector<Item> parse_items(std::string_view text);
std::string format_items(std::span<const Item> items);

Dataset parse_responses(std::string_view text, std::vector<Item> items);
std::string format_responses(const Dataset& dataset,
                             std::span<const std::string> comments = {});

std::string encode_attributes(const Attributes& attributes);
Attributes decode_attributes(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace maxdiff::csv
