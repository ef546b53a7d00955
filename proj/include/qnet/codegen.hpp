/**
 * Copyright 2026 The QNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef QNET_CODEGEN_HPP_
#define QNET_CODEGEN_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qnet/datatypes.hpp"

namespace qnet {

// Kernel source dialects.  Both emit C-style text; they differ in
// qualifiers and the grid-stride index idiom.
enum class Dialect : uint8_t {
  OPENCL = 0,
  CUDA = 1,
};

const char* dialect_name(Dialect d);

// Kernel argument flags.
inline constexpr uint32_t KERNEL_ARG_CONST = 1u;
inline constexpr uint32_t KERNEL_ARG_GLOBAL_MEM = 2u;
inline constexpr uint32_t KERNEL_ARG_LOCAL_MEM = 4u;

// One kernel parameter: a name, the concrete C type spelled in the
// signature (aliases such as Dtype are resolved before emission), and
// qualifier flags.  GLOBAL_MEM arguments are buffer pointers; everything
// else is passed by value.
struct KernelArg {
  std::string name;
  std::string type;
  uint32_t flags = 0;
};

// A generated kernel: source text plus the argument schema and a content
// hash over (dialect, source).  The kernel name must be unique within its
// compilation scope.
struct KernelProgram {
  std::string name;
  Dialect dialect = Dialect::OPENCL;
  std::string source;
  std::vector<KernelArg> args;
  std::array<uint8_t, 32> content_hash{};
};

// Alias block defining Dtype/MItype/MOtype/Difftype/Acctype (and, for
// integer compute types, Multtype: 64-bit when prefer_wide else 32-bit)
// plus the uint_tp index alias.  Deterministic text.
std::string define_types_header(DataType compute, DataType input,
                                DataType output, bool prefer_wide);

// Function signature in the dialect's idiom, without the opening brace.
// OPENCL widens FP16 value arguments to float (FP16 is pointer-only there).
std::string emit_function_signature(const std::string& name,
                                    const std::vector<KernelArg>& args,
                                    Dialect dialect);

// Grid-stride loop header, without the opening brace.
std::string emit_kernel_loop(const std::string& index_name,
                             const std::string& count_name, Dialect dialect);

// Complete ReLU forward kernel for a storage type: types header, signature,
// loop and the float or integer body.
KernelProgram emit_relu_program(DataType dtype, Dialect dialect);

// Whitespace normalization: lines trimmed, runs of blanks collapsed, empty
// lines dropped, LF endings.  Used for cache blobs and conformance checks.
std::string canonicalize_source(const std::string& src);

// Content hash over (dialect, source).
std::array<uint8_t, 32> program_hash(Dialect dialect, const std::string& src);

}  // namespace qnet

#endif  // QNET_CODEGEN_HPP_
