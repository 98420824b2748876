#pragma once

#include "hap/baselines/baselines.hpp"
#include "hap/core/error.hpp"
#include "hap/core/rng.hpp"
#include "hap/envs/registry.hpp"
#include "hap/harness/compare.hpp"
#include "hap/harness/plot.hpp"
#include "hap/harness/run.hpp"
#include "hap/service/server.hpp"
#include "hap/student/policy.hpp"
#include "hap/teacher/teachers.hpp"
#include "hap/tensor/mlp.hpp"
