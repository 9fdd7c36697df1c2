#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "elbert/model/parameters.h"
#include "elbert/numerics/matrix.h"

namespace elbert {

// On-disk layout:
//
//   elbert-weights 1
//   <key>=<value>                       (metadata, one per line)
//   tensor <name> <rows> <cols> <byte-offset>
//   end_header
//   <little-endian float64 blob, tensors in manifest order>
//
// Byte offsets are relative to the start of the blob. Round trips are exact.
struct WeightFile {
  struct Tensor {
    std::string name;
    Matrix value;
  };
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<Tensor> tensors;

  const std::string* find_metadata(const std::string& key) const;
  const Matrix* find_tensor(const std::string& name) const;
};

void write_weight_file(const std::filesystem::path& path, const WeightFile& file);
// Throws std::runtime_error on I/O or format problems.
WeightFile read_weight_file(const std::filesystem::path& path);

// Model config as "config.*" metadata plus every parameter tensor.
WeightFile to_weight_file(const Parameters& params);
Parameters parameters_from(const WeightFile& file);

void save_parameters(const std::filesystem::path& path, const Parameters& params);
Parameters load_parameters(const std::filesystem::path& path);

}  // namespace elbert
