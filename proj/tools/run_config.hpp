// Copyright 2026 The NARM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <narm/dataset.hpp>
#include <narm/training.hpp>

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace narm::cli {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything the commands read. Every field has a default except input.
struct RunConfig {
  TrainConfig train;
  PreprocessConfig preprocess;

  std::filesystem::path input;
  std::filesystem::path out_dir = "out";
  std::filesystem::path train_examples;  // default <out_dir>/train.tsv
  std::filesystem::path test_examples;   // default <out_dir>/test.tsv
  std::filesystem::path vocab;           // default <out_dir>/vocab.tsv
  std::filesystem::path train_sessions;  // default <out_dir>/train_sessions.tsv
  std::filesystem::path checkpoint;      // default: the one named by <out_dir>/best.txt

  std::string baseline;  // pop | spop | itemknn; empty means NARM
  double knn_lambda = 20.0;
  bool knn_exclude_self = true;
  std::size_t k = 20;
  std::string per_length_out;  // file name inside out_dir
  std::string items;           // predict: comma-separated item ids

  std::filesystem::path resolve_train_examples() const;
  std::filesystem::path resolve_test_examples() const;
  std::filesystem::path resolve_vocab() const;
  std::filesystem::path resolve_train_sessions() const;
};

struct ConfigKey {
  std::string name;  // kebab-case, also the flag name
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

/// Applies one key; accepts snake_case spellings too. Unknown keys throw.
void apply_key(RunConfig& config, const std::string& key, const std::string& value);

/// Flat key=value lines; '#' starts a comment.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// All keys as key=value lines, in table order.
std::string dump_config(const RunConfig& config);

}  // namespace narm::cli
