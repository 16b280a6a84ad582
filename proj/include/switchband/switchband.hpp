#pragma once

#include "switchband/bernoulli.hpp"
#include "switchband/config.hpp"
#include "switchband/dp_oracle.hpp"
#include "switchband/errors.hpp"
#include "switchband/experiment.hpp"
#include "switchband/io.hpp"
#include "switchband/kalman.hpp"
#include "switchband/model.hpp"
#include "switchband/normal.hpp"
#include "switchband/policy.hpp"
#include "switchband/simulate.hpp"
