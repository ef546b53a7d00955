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

#ifndef QNET_GRAPH_JSON_HPP_
#define QNET_GRAPH_JSON_HPP_

#include <string>

#include "qnet/graph.hpp"

namespace qnet {

// JSON text <-> GraphSpec.  The schema is documented in the repository
// README; layer type fields are named bottom_data_type / compute_data_type
// / top_data_type.  Parsing throws std::runtime_error with a one-line
// message on malformed documents.
GraphSpec graph_from_json(const std::string& text);
std::string graph_to_json(const GraphSpec& g);

// File variants.  save_graph writes via a temporary file and renames it
// into place.
GraphSpec load_graph(const std::string& path);
void save_graph(const GraphSpec& g, const std::string& path);

}  // namespace qnet

#endif  // QNET_GRAPH_JSON_HPP_
