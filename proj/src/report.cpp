#include "smyrf/report.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "smyrf/error.hpp"

namespace smyrf {

namespace {

bool valid_key(std::string_view key) {
    if (key.empty()) return false;
    return std::all_of(key.begin(), key.end(), [](char c) {
        return c != ' ' && c != '=' && c != '\n' && c != '#';
    });
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void ReportDoc::set(std::string key, std::string value) {
    if (!valid_key(key)) throw UsageError("ReportDoc: invalid key '" + key + "'");
    if (value.find('\n') != std::string::npos) {
        throw UsageError("ReportDoc: value for '" + key + "' contains a newline");
    }
    if (contains(key)) throw UsageError("ReportDoc: duplicate key '" + key + "'");
    entries_.emplace_back(std::move(key), std::move(value));
}

void ReportDoc::set_int(std::string key, std::int64_t value) {
    set(std::move(key), std::to_string(value));
}

void ReportDoc::set_uint(std::string key, std::uint64_t value) {
    set(std::move(key), std::to_string(value));
}

void ReportDoc::set_double(std::string key, double value) {
    set(std::move(key), format_double(value));
}

void ReportDoc::set_bool(std::string key, bool value) {
    set(std::move(key), value ? "true" : "false");
}

bool ReportDoc::contains(std::string_view key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e.first == key; });
}

const std::string& ReportDoc::get(std::string_view key) const {
    for (const auto& e : entries_) {
        if (e.first == key) return e.second;
    }
    throw FormatError("ReportDoc: missing key '" + std::string(key) + "'");
}

std::int64_t ReportDoc::get_int(std::string_view key) const {
    const std::string& v = get(key);
    char* end = nullptr;
    const long long out = std::strtoll(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size()) {
        throw FormatError("ReportDoc: '" + std::string(key) + "' is not an integer");
    }
    return out;
}

std::uint64_t ReportDoc::get_uint(std::string_view key) const {
    const std::string& v = get(key);
    char* end = nullptr;
    const unsigned long long out = std::strtoull(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size()) {
        throw FormatError("ReportDoc: '" + std::string(key) + "' is not an integer");
    }
    return out;
}

double ReportDoc::get_double(std::string_view key) const {
    const std::string& v = get(key);
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size()) {
        throw FormatError("ReportDoc: '" + std::string(key) + "' is not a number");
    }
    return out;
}

bool ReportDoc::get_bool(std::string_view key) const {
    const std::string& v = get(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw FormatError("ReportDoc: '" + std::string(key) + "' is not a bool");
}

std::string ReportDoc::serialize() const {
    std::string out;
    for (const auto& [key, value] : entries_) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    }
    return out;
}

ReportDoc ReportDoc::parse(std::string_view text) {
    ReportDoc doc;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const std::size_t sep = line.find(" = ");
        if (sep == std::string_view::npos) {
            throw FormatError("ReportDoc: malformed line " + std::to_string(line_no));
        }
        doc.set(std::string(line.substr(0, sep)), std::string(line.substr(sep + 3)));
    }
    return doc;
}

}  // namespace smyrf
