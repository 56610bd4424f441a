// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "s3net/error.hpp"

namespace s3net {

using ReportValue = std::variant<bool, std::int64_t, std::uint64_t, double, std::string>;
using ReportFields = std::vector<std::pair<std::string, ReportValue>>;

/// Ordered metrics. Text form is one `key=value` per line; table rows print
/// as `name.i.key=value`. JSON form mirrors the same structure.
class Report {
  public:
    template <typename T>
    void set(std::string key, T value) {
        if constexpr (std::is_same_v<T, ReportValue>)
            set_value(std::move(key), std::move(value));
        else if constexpr (std::is_same_v<T, bool>)
            set_value(std::move(key), ReportValue(value));
        else if constexpr (std::is_floating_point_v<T>)
            set_value(std::move(key), ReportValue(static_cast<double>(value)));
        else if constexpr (std::is_integral_v<T> && std::is_signed_v<T>)
            set_value(std::move(key), ReportValue(static_cast<std::int64_t>(value)));
        else if constexpr (std::is_integral_v<T>)
            set_value(std::move(key), ReportValue(static_cast<std::uint64_t>(value)));
        else
            set_value(std::move(key), ReportValue(std::string(value)));
    }
    void add_row(const std::string& table, ReportFields row);

    const ReportValue* find(const std::string& key) const;
    double number(const std::string& key) const;  // Errc::input when missing or not numeric
    const ReportFields& fields() const noexcept { return fields_; }
    const std::vector<std::pair<std::string, std::vector<ReportFields>>>& tables() const noexcept { return tables_; }

    std::string text() const;
    std::string json() const;
    void write_json(const std::filesystem::path& path) const;  // atomic

    /// A command that completed but whose check failed (e.g. gradcheck) still
    /// returns its report; callers map the failure to an exit status.
    void set_failure(Errc code) { failure_ = code; }
    std::optional<Errc> failure() const noexcept { return failure_; }

  private:
    void set_value(std::string key, ReportValue value);
    std::optional<Errc> failure_;
    ReportFields fields_;
    std::vector<std::pair<std::string, std::vector<ReportFields>>> tables_;
};

std::string format_value(const ReportValue& v);

}  // namespace s3net
