#pragma once

#include "ofu/bench.hpp"
#include "ofu/config.hpp"
#include "ofu/controller.hpp"
#include "ofu/costs.hpp"
#include "ofu/dap.hpp"
#include "ofu/errors.hpp"
#include "ofu/estimation.hpp"
#include "ofu/io.hpp"
#include "ofu/linalg.hpp"
#include "ofu/optimism.hpp"
#include "ofu/oracle.hpp"
#include "ofu/parallel.hpp"
#include "ofu/record.hpp"
#include "ofu/relaxation.hpp"
#include "ofu/rng.hpp"
#include "ofu/sco.hpp"
#include "ofu/suite.hpp"
#include "ofu/system.hpp"
