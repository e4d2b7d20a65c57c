#pragma once

#include "overton/judge/client.hpp"
#include "overton/judge/embedding.hpp"
#include "overton/judge/evaluate.hpp"
#include "overton/judge/prompt.hpp"
#include "overton/judge/runner.hpp"
