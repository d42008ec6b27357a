#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "protoed/autodiff.hpp"
#include "protoed/model.hpp"

namespace protoed {

// Binary tensor file, little-endian:
//   "PROTOED1" | u64 meta_len | meta (JSON) | u64 count |
//   count x (u64 name_len | name | u64 rank | rank x u64 dim | f64 values)
struct TensorFile {
  std::string meta;
  std::vector<Tensor> tensors;
};

void write_tensor_file(std::ostream& out, const std::string& meta, const std::vector<const Tensor*>& tensors);
TensorFile read_tensor_file(std::istream& in);

struct Checkpoint {
  Model model;
  std::optional<Memory> memory;
};

// Model tensors plus (optionally) the inference keys, so predictions need no
// access to the train set.
void save_checkpoint(const std::string& path, const Model& model, const Memory* memory = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace protoed
