// Copyright 2026 The S2M Toolkit Authors
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

#include "s2m/bench.hpp"
#include "s2m/components.hpp"
#include "s2m/core.hpp"
#include "s2m/io.hpp"
#include "s2m/metrics.hpp"
#include "s2m/prompts.hpp"
#include "s2m/scenes.hpp"
#include "s2m/scoring.hpp"
#include "s2m/segmenter.hpp"
#include "s2m/synth.hpp"
