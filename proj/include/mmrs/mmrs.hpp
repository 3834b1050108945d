/*
 * Copyright 2026 The mmrs Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "mmrs/cli/config.hpp"
#include "mmrs/cli/experiment.hpp"
#include "mmrs/cli/synthetic.hpp"
#include "mmrs/core.hpp"
#include "mmrs/eval.hpp"
#include "mmrs/fusion_conv.hpp"
#include "mmrs/ingest.hpp"
#include "mmrs/io.hpp"
#include "mmrs/modality_graph.hpp"
#include "mmrs/model_train.hpp"
