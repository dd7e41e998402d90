#pragma once

#include "flowda/model/batch.hpp"
#include "flowda/model/domain.hpp"
#include "flowda/model/generator.hpp"
#include "flowda/model/regressor.hpp"
