#pragma once

#include "flowda/metrics/losses.hpp"
#include "flowda/metrics/report.hpp"
#include "flowda/metrics/skill.hpp"
