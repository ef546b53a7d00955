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

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qnet/codegen.hpp"
#include "qnet/graph_json.hpp"
#include "qnet/memory_plan.hpp"
#include "qnet/model_store.hpp"
#include "qnet/net.hpp"
#include "qnet/sha256.hpp"

namespace {

using namespace qnet;

// ---------------------------------------------------------------------------
// Helpers

DataType parse_precision(const std::string& s) {
  const auto t = dtype_from_name(s);
  if (!t) throw std::runtime_error("unknown precision: " + s);
  return *t;
}

// CSV input: one sample per row, comma-separated values, optional header
// line (detected by the presence of alphabetic characters).
std::vector<std::vector<double>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (line.empty()) continue;
    if (first) {
      first = false;
      const bool header = std::any_of(line.begin(), line.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c));
      });
      if (header) continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("invalid csv value: " + cell);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("cannot write: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

std::string format_value(float v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

// Builds a single-sample input tensor for the net's (single) INPUT layer.
Tensor row_tensor(const Net& net, const std::vector<double>& row) {
  const GraphSpec& g = net.graph();
  for (const LayerSpec& l : g.layers) {
    if (l.kind != LayerKind::INPUT) continue;
    std::vector<int64_t> shape = l.input_shape;
    shape[0] = 1;
    int64_t per_sample = 1;
    for (size_t d = 1; d < shape.size(); ++d) per_sample *= shape[d];
    if (static_cast<int64_t>(row.size()) != per_sample) {
      throw std::runtime_error("shape mismatch");
    }
    Tensor t(DataType::FP32, shape);
    for (int64_t i = 0; i < t.count(); ++i) {
      t.fset(i, static_cast<float>(row[static_cast<size_t>(i)]));
    }
    return t;
  }
  throw std::runtime_error("graph has no input layer");
}

std::string single_input_name(const Net& net) {
  const auto names = net.input_names();
  if (names.size() != 1) {
    throw std::runtime_error("csv input requires a single-input graph");
  }
  return names.front();
}

void apply_seed(GraphSpec* g, uint64_t seed) {
  for (LayerSpec& l : g->layers) {
    if (l.kind == LayerKind::MOE && l.moe) {
      auto mp = std::make_shared<MoeLayerParams>(*l.moe);
      mp->seed = seed;
      l.moe = std::move(mp);
    }
  }
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_observe(const std::string& graph_path, const std::string& model_path,
                const std::string& in_path, const std::string& out_path) {
  GraphSpec g = load_graph(graph_path);
  Net net(std::move(g));
  net.load_weights(load_model(model_path));

  const auto rows = read_csv(in_path);
  if (rows.empty()) throw std::runtime_error("no calibration data");

  net.set_quant_mode(QuantMode::OBSERVE);
  const std::string input = single_input_name(net);
  for (const auto& row : rows) {
    net.forward({{input, row_tensor(net, row)}});
  }
  net.finalize_quantizers();
  save_model(net.to_model(), out_path);
  return 0;
}

int cmd_infer(const std::string& graph_path, const std::string& model_path,
              const std::string& precision, const std::string& in_path,
              const std::string& out_path, bool seed_set, uint64_t seed) {
  const DataType target = parse_precision(precision);
  GraphSpec g = override_precision(load_graph(graph_path), target);
  if (seed_set) apply_seed(&g, seed);
  Net net(std::move(g));
  net.load_weights(load_model(model_path));
  net.finalize_quantizers();
  try {
    net.set_quant_mode(target == DataType::FP32 ? QuantMode::PASSIVE
                                                : QuantMode::QUANTIZED);
  } catch (const std::logic_error&) {
    throw std::runtime_error("model not calibrated");
  }

  const auto rows = read_csv(in_path);
  const std::string input = single_input_name(net);
  const auto sinks = net.output_names();

  std::ostringstream csv;
  for (size_t s = 0; s < rows.size(); ++s) {
    auto outputs = net.forward({{input, row_tensor(net, rows[s])}});
    csv << s;
    for (const std::string& name : sinks) {
      Tensor& t = outputs.at(name);
      const Tensor f = is_quantized(t.dtype()) ? dequantize(t)
                                               : cast_float(t, DataType::FP32);
      for (int64_t i = 0; i < f.count(); ++i) csv << ',' << format_value(f.fget(i));
    }
    csv << '\n';
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    write_text(out_path, csv.str());
  }
  return 0;
}

int cmd_mem_plan(const std::string& graph_path, bool reuse) {
  const GraphSpec g = load_graph(graph_path);
  const ValidationReport report = validate(g);
  if (!report.ok()) {
    throw std::runtime_error("invalid graph: " + report.violations.front());
  }
  const MemoryPlan off = plan_memory(g, false);
  const MemoryPlan on = plan_memory(g, true);
  std::cout << "reuse_off_peak_bytes," << off.peak_bytes << '\n';
  std::cout << "reuse_on_peak_bytes," << on.peak_bytes << '\n';
  std::cout << "ratio,"
            << (on.peak_bytes != 0
                    ? static_cast<double>(off.peak_bytes) /
                          static_cast<double>(on.peak_bytes)
                    : 0.0)
            << '\n';

  const MemoryPlan& sel = reuse ? on : off;
  std::cout << "plan," << (reuse ? "reuse_on" : "reuse_off") << '\n';
  for (size_t s = 0; s < sel.slot_sizes.size(); ++s) {
    std::cout << "slot," << s << ',' << sel.slot_sizes[s];
    for (const auto& [blob, slot] : sel.assignment) {
      if (slot == static_cast<int>(s)) std::cout << ',' << blob;
    }
    std::cout << '\n';
  }
  return 0;
}

int cmd_emit_kernel(const std::string& op, const std::string& precision,
                    const std::string& dialect_str,
                    const std::string& out_path) {
  if (op != "relu") throw std::runtime_error("unsupported kernel: " + op);
  const DataType dtype = parse_precision(precision);
  Dialect dialect;
  if (dialect_str == "opencl") {
    dialect = Dialect::OPENCL;
  } else if (dialect_str == "cuda") {
    dialect = Dialect::CUDA;
  } else {
    throw std::runtime_error("unknown dialect: " + dialect_str);
  }
  const KernelProgram program = emit_relu_program(dtype, dialect);
  write_text(out_path, program.source);
  std::cout << digest_hex(program.content_hash) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-precision quantized inference engine"};
  app.require_subcommand(1);

  std::string graph_path, model_path, in_path, out_path;
  std::string precision = "fp32";
  std::string dialect = "opencl";
  std::string op;
  bool reuse = false;
  uint64_t seed = 0;
  bool seed_set = false;

  CLI::App* observe = app.add_subcommand("observe", "Calibrate value ranges");
  observe->add_option("--graph", graph_path)->required();
  observe->add_option("--model", model_path)->required();
  observe->add_option("--in", in_path)->required();
  observe->add_option("--out", out_path)->required();

  CLI::App* infer = app.add_subcommand("infer", "Run inference");
  infer->add_option("--graph", graph_path)->required();
  infer->add_option("--model", model_path)->required();
  infer->add_option("--precision", precision);
  infer->add_option("--in", in_path)->required();
  infer->add_option("--out", out_path);
  infer->add_option("--seed", seed)->each([&seed_set](const std::string&) {
    seed_set = true;
  });

  CLI::App* mem_plan = app.add_subcommand("mem-plan", "Plan blob memory");
  mem_plan->add_option("--graph", graph_path)->required();
  mem_plan->add_flag("--reuse", reuse);

  CLI::App* emit = app.add_subcommand("emit-kernel", "Generate kernel source");
  emit->add_option("op", op, "Kernel operator (relu)")->required();
  emit->add_option("--precision", precision);
  emit->add_option("--dialect", dialect);
  emit->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (observe->parsed()) {
      return cmd_observe(graph_path, model_path, in_path, out_path);
    }
    if (infer->parsed()) {
      return cmd_infer(graph_path, model_path, precision, in_path, out_path,
                       seed_set, seed);
    }
    if (mem_plan->parsed()) return cmd_mem_plan(graph_path, reuse);
    if (emit->parsed()) {
      return cmd_emit_kernel(op, precision, dialect, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
