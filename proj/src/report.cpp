// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/report.hpp"

#include <charconv>
#include <cmath>
#include <json.hpp>

#include "s3net/error.hpp"
#include "s3net/features.hpp"

namespace s3net {

namespace {

nlohmann::ordered_json to_json(const ReportValue& v) {
    return std::visit([](const auto& x) { return nlohmann::ordered_json(x); }, v);
}

nlohmann::ordered_json to_json(const ReportFields& fields) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (const auto& [k, v] : fields) obj[k] = to_json(v);
    return obj;
}

}  // namespace

std::string format_value(const ReportValue& v) {
    struct Visitor {
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(std::uint64_t u) const { return std::to_string(u); }
        std::string operator()(double d) const {
            if (!std::isfinite(d)) return std::isnan(d) ? "nan" : (d > 0 ? "inf" : "-inf");
            char buf[64];
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
            return std::string(buf, end);
        }
        std::string operator()(const std::string& s) const { return s; }
    };
    return std::visit(Visitor{}, v);
}

void Report::set_value(std::string key, ReportValue value) {
    for (auto& [k, v] : fields_) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    fields_.emplace_back(std::move(key), std::move(value));
}

void Report::add_row(const std::string& table, ReportFields row) {
    for (auto& [name, rows] : tables_) {
        if (name == table) {
            rows.push_back(std::move(row));
            return;
        }
    }
    tables_.push_back({table, {std::move(row)}});
}

const ReportValue* Report::find(const std::string& key) const {
    for (const auto& [k, v] : fields_)
        if (k == key) return &v;
    return nullptr;
}

double Report::number(const std::string& key) const {
    const ReportValue* v = find(key);
    if (!v) fail(Errc::input, "report has no field '" + key + "'");
    if (auto p = std::get_if<double>(v)) return *p;
    if (auto p = std::get_if<std::int64_t>(v)) return static_cast<double>(*p);
    if (auto p = std::get_if<std::uint64_t>(v)) return static_cast<double>(*p);
    if (auto p = std::get_if<bool>(v)) return *p ? 1.0 : 0.0;
    fail(Errc::input, "report field '" + key + "' is not numeric");
}

std::string Report::text() const {
    std::string out;
    for (const auto& [k, v] : fields_) out += k + "=" + format_value(v) + "\n";
    for (const auto& [name, rows] : tables_)
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (const auto& [k, v] : rows[i]) out += name + "." + std::to_string(i) + "." + k + "=" + format_value(v) + "\n";
    return out;
}

std::string Report::json() const {
    nlohmann::ordered_json doc = to_json(fields_);
    for (const auto& [name, rows] : tables_) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& r : rows) arr.push_back(to_json(r));
        doc[name] = std::move(arr);
    }
    return doc.dump(2) + "\n";
}

void Report::write_json(const std::filesystem::path& path) const {
    const std::string s = json();
    bytes::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

}  // namespace s3net
