#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "prnet/tensor.hpp"

namespace prnet {

// Named tensors a model exposes for persistence (parameter values plus
// non-trainable state like batch-norm running averages).
using StateDict = std::vector<std::pair<std::string, Tensor*>>;

// Binary format: magic "PRN1", then one record per tensor until EOF:
//   name_len u64 LE, name bytes, rank u64 LE, extents u64 LE each,
//   width flag byte (4 or 8), values as little-endian f32/f64.
// f64 round-trips bit-exactly; f32 narrows on save.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries,
                     bool f32 = false);

std::map<std::string, Tensor> load_checkpoint(const std::string& path);

// Copies loaded tensors into the targets by name; every target must be
// present with a matching shape. Extra loaded names are left alone.
void load_into(const std::map<std::string, Tensor>& loaded, const StateDict& targets);

}  // namespace prnet
