#pragma once

#include "flowda/numerics/grad_check.hpp"
#include "flowda/numerics/ops.hpp"
#include "flowda/numerics/tape.hpp"
#include "flowda/numerics/tensor.hpp"
