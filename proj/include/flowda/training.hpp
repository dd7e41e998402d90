#pragma once

#include "flowda/training/checkpoint.hpp"
#include "flowda/training/config.hpp"
#include "flowda/training/evaluate.hpp"
#include "flowda/training/experiment.hpp"
#include "flowda/training/log.hpp"
#include "flowda/training/optim.hpp"
#include "flowda/training/schedule.hpp"
#include "flowda/training/session.hpp"
#include "flowda/training/steps.hpp"
