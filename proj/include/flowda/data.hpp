#pragma once

#include "flowda/data/basin.hpp"
#include "flowda/data/csv.hpp"
#include "flowda/data/normalize.hpp"
#include "flowda/data/split.hpp"
#include "flowda/data/synth.hpp"
#include "flowda/data/window_cache.hpp"
#include "flowda/data/windows.hpp"
