/*
 * Copyright 2026 The FedDP Simulator Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDDP_HPP_
#define FEDDP_HPP_

#include "feddp/accountant.hpp"
#include "feddp/aggregation.hpp"
#include "feddp/comm_metrics.hpp"
#include "feddp/config.hpp"
#include "feddp/datasets.hpp"
#include "feddp/dp_optimizer.hpp"
#include "feddp/errors.hpp"
#include "feddp/model.hpp"
#include "feddp/orchestrator.hpp"
#include "feddp/partition.hpp"
#include "feddp/report.hpp"
#include "feddp/rng.hpp"
#include "feddp/sweep.hpp"

#endif  // FEDDP_HPP_
