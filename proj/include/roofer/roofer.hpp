// Copyright 2026 The Roofer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "roofer/autodiff.hpp"
#include "roofer/checkpoint.hpp"
#include "roofer/config.hpp"
#include "roofer/dataset.hpp"
#include "roofer/encoder.hpp"
#include "roofer/error.hpp"
#include "roofer/kb_store.hpp"
#include "roofer/knowledge.hpp"
#include "roofer/metrics.hpp"
#include "roofer/roof_model.hpp"
#include "roofer/tokenizer.hpp"
#include "roofer/trainer.hpp"
#include "roofer/verbalizer.hpp"
