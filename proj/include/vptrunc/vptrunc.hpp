// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vptrunc/common.hpp"
#include "vptrunc/gaussianity.hpp"
#include "vptrunc/harness.hpp"
#include "vptrunc/io.hpp"
#include "vptrunc/sampler.hpp"
#include "vptrunc/schedule.hpp"
#include "vptrunc/stats.hpp"
#include "vptrunc/truncation.hpp"
