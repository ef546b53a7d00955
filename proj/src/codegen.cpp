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

#include "qnet/codegen.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

#include "qnet/sha256.hpp"

namespace qnet {

namespace {

// Boilerplate preceding the type aliases.  OpenCL translation units lack
// stdint, so the fixed-width names are established first; CUDA provides
// them natively.
std::string dialect_setup(Dialect d, bool wants_fp16) {
  if (d == Dialect::CUDA) return "";
  std::string s;
  s += "typedef char int8_t;\n";
  s += "typedef unsigned char uint8_t;\n";
  s += "typedef short int16_t;\n";
  s += "typedef unsigned short uint16_t;\n";
  s += "typedef int int32_t;\n";
  s += "typedef unsigned int uint32_t;\n";
  s += "typedef long int64_t;\n";
  s += "typedef unsigned long uint64_t;\n";
  if (wants_fp16) {
    s += "#pragma OPENCL EXTENSION cl_khr_fp16 : enable\n";
  }
  return s;
}

}  // namespace

const char* dialect_name(Dialect d) {
  return d == Dialect::OPENCL ? "opencl" : "cuda";
}

std::string define_types_header(DataType compute, DataType input,
                                DataType output, bool prefer_wide) {
  std::ostringstream ss;
  if (is_quantized(compute)) {
    ss << "typedef " << (prefer_wide ? "int64_t" : "int32_t")
       << " Multtype;\n";
  }
  ss << "typedef " << dtype_ctype(compute) << " Dtype;\n";
  ss << "typedef " << dtype_ctype(input) << " MItype;\n";
  ss << "typedef " << dtype_ctype(output) << " MOtype;\n";
  const WideTypeMap w = derive_wide_types(compute);
  ss << "typedef " << wide_ctype(w.diff_type) << " Difftype;\n";
  ss << "typedef " << wide_ctype(w.acc_type) << " Acctype;\n";
  ss << "typedef uint32_t uint_tp;\n";
  return ss.str();
}

std::string emit_function_signature(const std::string& name,
                                    const std::vector<KernelArg>& args,
                                    Dialect dialect) {
  std::set<std::string> seen;
  for (const KernelArg& a : args) {
    if (!seen.insert(a.name).second) {
      throw std::invalid_argument("duplicate kernel argument name");
    }
    if ((a.flags & KERNEL_ARG_GLOBAL_MEM) && (a.flags & KERNEL_ARG_LOCAL_MEM)) {
      throw std::invalid_argument("global and local memory flags conflict");
    }
  }
  std::ostringstream ss;
  if (dialect == Dialect::OPENCL) {
    ss << "__kernel\nvoid " << name << "(";
  } else {
    ss << "extern \"C\" __global__ void\n" << name << "(";
  }
  bool first = true;
  for (const KernelArg& a : args) {
    if (!first) ss << ", ";
    first = false;
    if (a.flags & (KERNEL_ARG_GLOBAL_MEM | KERNEL_ARG_LOCAL_MEM)) {
      if (dialect == Dialect::OPENCL) {
        ss << ((a.flags & KERNEL_ARG_GLOBAL_MEM) ? "__global " : "__local ");
      }
      if (a.flags & KERNEL_ARG_CONST) ss << "const ";
      ss << a.type << "* " << a.name;
    } else {
      std::string t = a.type;
      // OpenCL supports FP16 only behind pointers; value arguments widen.
      if (dialect == Dialect::OPENCL && t == "half") t = "float";
      if (a.flags & KERNEL_ARG_CONST) ss << "const ";
      ss << t << " " << a.name;
    }
  }
  ss << ")";
  return ss.str();
}

std::string emit_kernel_loop(const std::string& index_name,
                             const std::string& count_name, Dialect dialect) {
  std::ostringstream ss;
  if (dialect == Dialect::OPENCL) {
    ss << "for (uint_tp " << index_name << " = get_global_id(0); "
       << index_name << " < (" << count_name << "); " << index_name
       << " += get_global_size(0))";
  } else {
    ss << "for (uint_tp " << index_name
       << " = blockIdx.x * blockDim.x + threadIdx.x; " << index_name << " < ("
       << count_name << "); " << index_name
       << " += blockDim.x * gridDim.x)";
  }
  return ss.str();
}

KernelProgram emit_relu_program(DataType dtype, Dialect dialect) {
  KernelProgram prog;
  prog.name = "ReLUForward";
  prog.dialect = dialect;

  std::vector<KernelArg>& args = prog.args;
  args.push_back({"n", "uint32_t", KERNEL_ARG_CONST});
  args.push_back(
      {"in", dtype_ctype(dtype), KERNEL_ARG_CONST | KERNEL_ARG_GLOBAL_MEM});
  args.push_back({"out", dtype_ctype(dtype), KERNEL_ARG_GLOBAL_MEM});
  if (is_float_type(dtype)) {
    args.push_back({"negative_slope", dtype_ctype(dtype), KERNEL_ARG_CONST});
  } else {
    const WideTypeMap w = derive_wide_types(dtype);
    const char* acct = wide_ctype(w.acc_type);
    args.push_back({"shift_bits", "int8_t", KERNEL_ARG_CONST});
    args.push_back({"in_zero", wide_ctype(w.diff_type), KERNEL_ARG_CONST});
    args.push_back({"mult", acct, KERNEL_ARG_CONST});
    args.push_back({"shift", "int8_t", KERNEL_ARG_CONST});
    args.push_back({"out_zero", acct, KERNEL_ARG_CONST});
    args.push_back({"out_min", acct, KERNEL_ARG_CONST});
    args.push_back({"out_max", acct, KERNEL_ARG_CONST});
  }

  std::ostringstream ss;
  ss << dialect_setup(dialect, dtype == DataType::FP16);
  ss << define_types_header(dtype, dtype, dtype, true);
  ss << emit_function_signature(prog.name, args, dialect) << " {\n";
  ss << "  " << emit_kernel_loop("index", "n", dialect) << " {\n";
  if (is_float_type(dtype)) {
    ss << "    out[index] = in[index] > (Dtype)0 ? in[index] : in[index]"
       << " * negative_slope;\n";
  } else {
    ss << "    Difftype relu = max((Difftype)((Difftype)(in[index]) - "
       << "in_zero), (Difftype)0);\n";
    ss << "    Acctype reg = (Acctype)(((Multtype)(relu) * "
       << "(Multtype)(mult)) / ((Multtype)1 << shift_bits));\n";
    ss << "    if (shift >= 0) {\n";
    ss << "      reg = reg >> shift;\n";
    ss << "    } else {\n";
    ss << "      reg = reg << -shift;\n";
    ss << "    }\n";
    ss << "    out[index] = (Dtype)(min(max(reg + out_zero, out_min), "
       << "out_max));\n";
  }
  ss << "  }\n";
  ss << "}\n";
  prog.source = ss.str();
  prog.content_hash = program_hash(dialect, prog.source);
  return prog;
}

std::string canonicalize_source(const std::string& src) {
  std::string out;
  std::string line;
  std::istringstream in(src);
  while (std::getline(in, line)) {
    std::string collapsed;
    bool in_blank = true;  // leading blanks trimmed
    for (char c : line) {
      if (c == ' ' || c == '\t' || c == '\r') {
        if (!in_blank) collapsed.push_back(' ');
        in_blank = true;
      } else {
        collapsed.push_back(c);
        in_blank = false;
      }
    }
    while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
    if (collapsed.empty()) continue;
    out += collapsed;
    out.push_back('\n');
  }
  return out;
}

std::array<uint8_t, 32> program_hash(Dialect dialect, const std::string& src) {
  std::string keyed = dialect_name(dialect);
  keyed.push_back('\n');
  keyed += src;
  return sha256(keyed.data(), keyed.size());
}

}  // namespace qnet
