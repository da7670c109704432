#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "dln/losses.hpp"
#include "dln/network.hpp"

namespace dln {

/// {"dims": [...], "layers": [[row-major entries], ...]}. Doubles are written
/// in shortest round-trip form, so a save/load cycle is exact.
nlohmann::json stack_to_json(const WeightStack& s);
WeightStack stack_from_json(const nlohmann::json& j);

WeightStack read_stack_file(const std::filesystem::path& path);

/// CSV with header x_1..x_{d_in}, y_1..y_{d_out} and one row per sample.
Dataset read_dataset_csv(const std::filesystem::path& path, std::size_t d_in, std::size_t d_out);
std::string dataset_to_csv(const Dataset& d);

/// Writes to a sibling temporary file and renames it into place, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

}  // namespace dln
