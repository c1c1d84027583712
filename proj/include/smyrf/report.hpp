#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace smyrf {

// Flat ordered key/value document: one "key = value" line per entry, '#'
// comment lines ignored. Human-diffable, and parse(serialize(doc)) == doc
// exactly (doubles are printed with 17 significant digits).
class ReportDoc {
public:
    void set(std::string key, std::string value);
    void set_int(std::string key, std::int64_t value);
    void set_uint(std::string key, std::uint64_t value);
    void set_double(std::string key, double value);
    void set_bool(std::string key, bool value);

    bool contains(std::string_view key) const;
    const std::string& get(std::string_view key) const;  // FormatError if missing
    std::int64_t get_int(std::string_view key) const;
    std::uint64_t get_uint(std::string_view key) const;
    double get_double(std::string_view key) const;
    bool get_bool(std::string_view key) const;

    std::string serialize() const;
    static ReportDoc parse(std::string_view text);

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    bool operator==(const ReportDoc&) const = default;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_double(double value);

}  // namespace smyrf
