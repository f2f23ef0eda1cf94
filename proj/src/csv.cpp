#include "maxdiff/csv.hpp"

#include <fstream>
#include <sstream>

#include "maxdiff/error.hpp"

namespace maxdiff::csv {

namespace {

std::string_view strip_comments(std::string_view text) {
    while (!text.empty() && text.front() == '#') {
        auto nl = text.find('\n');
        if (nl == std::string_view::npos) return {};
        text.remove_prefix(nl + 1);
    }
    return text;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    if (text.empty()) return out;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::size_t parse_count(const std::string& field, const char* what,
                        std::size_t line) {
    std::size_t value = 0;
    std::size_t used = 0;
    try {
        if (field.empty() || field.front() == '-') throw std::invalid_argument(field);
        value = std::stoul(field, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != field.size())
        throw Error(ErrorKind::invalid_input,
                    "row " + std::to_string(line) + ": bad " + what + " '" +
                        field + "'");
    return value;
}

void expect_header(const std::vector<Row>& rows, const Row& header,
                   const char* what) {
    if (rows.empty() || rows.front() != header) {
        std::string expected;
        for (std::size_t i = 0; i < header.size(); ++i)
            expected += (i ? "," : "") + header[i];
        throw Error(ErrorKind::invalid_input,
                    std::string(what) + " file must start with header '" +
                        expected + "'");
    }
}

bool blank(const Row& row) { return row.size() == 1 && row[0].empty(); }

}  // namespace

std::vector<Row> parse(std::string_view text) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        any = true;
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"': quoted = true; break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                [[fallthrough]];
            case '\n':
                row.push_back(std::move(field));
                field.clear();
                rows.push_back(std::move(row));
                row.clear();
                any = false;
                break;
            default: field += c;
        }
    }
    if (quoted) throw Error(ErrorKind::invalid_input, "unterminated quoted field");
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string quote_field(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_row(std::span<const std::string> fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += quote_field(fields[i]);
    }
    out += '\n';
    return out;
}

std::vector<std::string> leading_comments(std::string_view text) {
    std::vector<std::string> out;
    while (!text.empty() && text.front() == '#') {
        auto nl = text.find('\n');
        auto line = text.substr(1, nl == std::string_view::npos ? nl : nl - 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return out;
}

std::vector<Item> parse_items(std::string_view text) {
    const auto rows = parse(strip_comments(text));
    expect_header(rows, {"id", "label", "description"}, "items");
    std::vector<Item> items;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (blank(rows[r])) continue;
        if (rows[r].size() != 3)
            throw Error(ErrorKind::invalid_input,
                        "items row " + std::to_string(r) + ": expected 3 fields");
        const auto& id = rows[r][0];
        if (id.find_first_of("|;=") != std::string::npos)
            throw Error(ErrorKind::invalid_input,
                        "item id '" + id + "' contains a reserved character");
        items.push_back({id, rows[r][1], rows[r][2]});
    }
    validate_items(items);
    return items;
}

std::string format_items(std::span<const Item> items) {
    std::string out = "id,label,description\n";
    for (const auto& item : items) {
        const std::string fields[] = {item.id, item.label, item.description};
        out += format_row(fields);
    }
    return out;
}

std::string encode_attributes(const Attributes& attributes) {
    std::string out;
    for (const auto& [key, value] : attributes) {
        if (key.empty() || key.find_first_of(";=") != std::string::npos ||
            value.find_first_of(";=") != std::string::npos)
            throw Error(ErrorKind::invalid_input,
                        "attribute '" + key + "' contains a reserved character");
        if (!out.empty()) out += ';';
        out += key + "=" + value;
    }
    return out;
}

Attributes decode_attributes(std::string_view text) {
    Attributes out;
    for (const auto& pair : split(text, ';')) {
        if (pair.empty()) continue;
        auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorKind::invalid_input,
                        "malformed attribute '" + pair + "'");
        out[pair.substr(0, eq)] = pair.substr(eq + 1);
    }
    return out;
}

Dataset parse_responses(std::string_view text, std::vector<Item> items) {
    const auto rows = parse(strip_comments(text));
    expect_header(rows,
                  {"respondent_id", "version", "screen", "shown", "best", "worst",
                   "attributes"},
                  "responses");
    Dataset dataset{std::move(items), {}};
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (blank(row)) continue;
        if (row.size() != 7)
            throw Error(ErrorKind::invalid_input,
                        "responses row " + std::to_string(r) +
                            ": expected 7 fields");
        ChoiceObservation obs;
        obs.respondent_id = row[0];
        obs.version_index = parse_count(row[1], "version", r);
        obs.screen_index = parse_count(row[2], "screen", r);
        obs.shown = split(row[3], '|');
        obs.best = row[4];
        if (!row[5].empty()) obs.worst = row[5];
        obs.attributes = decode_attributes(row[6]);
        dataset.observations.push_back(std::move(obs));
    }
    return dataset;
}

std::string format_responses(const Dataset& dataset,
                             std::span<const std::string> comments) {
    std::string out;
    for (const auto& line : comments) out += "#" + line + "\n";
    out += "respondent_id,version,screen,shown,best,worst,attributes\n";
    for (const auto& obs : dataset.observations) {
        std::string shown;
        for (std::size_t i = 0; i < obs.shown.size(); ++i)
            shown += (i ? "|" : "") + obs.shown[i];
        const std::string fields[] = {obs.respondent_id,
                                      std::to_string(obs.version_index),
                                      std::to_string(obs.screen_index),
                                      shown,
                                      obs.best,
                                      obs.worst.value_or(""),
                                      encode_attributes(obs.attributes)};
        out += format_row(fields);
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for '" + path.string() + "'");
}

}  // namespace maxdiff::csv
