// SPDX-License-Identifier: Apache-2.0
//
// ckmsense - environment-aware NLoS sensing with channel angle-delay maps
// Copyright (C) 2026 The ckmsense Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CKMSENSE_HPP
#define CKMSENSE_HPP

#include "ckmsense/common.hpp"
#include "ckmsense/geometry.hpp"
#include "ckmsense/mlp.hpp"
#include "ckmsense/channel_map.hpp"
#include "ckmsense/cadm.hpp"
#include "ckmsense/sensing.hpp"
#include "ckmsense/crlb.hpp"
#include "ckmsense/io.hpp"
#include "ckmsense/bench.hpp"
#include "ckmsense/plot.hpp"

#endif
