#pragma once

#include "icvqa/ansatz.hpp"
#include "icvqa/cobyla.hpp"
#include "icvqa/errors.hpp"
#include "icvqa/harness.hpp"
#include "icvqa/instances.hpp"
#include "icvqa/metrics.hpp"
#include "icvqa/problem.hpp"
#include "icvqa/report.hpp"
#include "icvqa/rng.hpp"
#include "icvqa/statevector.hpp"
#include "icvqa/sweep.hpp"
