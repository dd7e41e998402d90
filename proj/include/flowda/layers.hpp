#pragma once

#include "flowda/layers/attention.hpp"
#include "flowda/layers/dropout.hpp"
#include "flowda/layers/init.hpp"
#include "flowda/layers/lstm.hpp"
#include "flowda/layers/mlp.hpp"
