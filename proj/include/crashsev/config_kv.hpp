#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crashsev/tabnet.hpp"

namespace crashsev::config {

// Sets one TabNetConfig field from its text form. Keys mirror the field
// names (n_d, learning_rate, mask_type, ...). Unknown key or unparsable
// value -> ConfigError.
void apply_kv(tabnet::TabNetConfig& cfg, const std::string& key, const std::string& value);

// All fields in declaration order, values in round-trip text form.
std::vector<std::pair<std::string, std::string>> to_kv(const tabnet::TabNetConfig& cfg);

// Flat key=value file, one pair per line; '#' starts a comment. Unlisted
// fields keep the values from `base`.
tabnet::TabNetConfig load_kv_file(const std::string& path, tabnet::TabNetConfig base);
void save_kv_file(const tabnet::TabNetConfig& cfg, const std::string& path);

}  // namespace crashsev::config
