// Copyright 2026 The qmpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "qmpc/common.hpp"
#include "qmpc/fxp.hpp"
#include "qmpc/transport.hpp"
#include "qmpc/party.hpp"
#include "qmpc/rss.hpp"
#include "qmpc/typecast.hpp"
#include "qmpc/nonlinear.hpp"
#include "qmpc/oracle.hpp"
#include "qmpc/graph.hpp"
#include "qmpc/model.hpp"
