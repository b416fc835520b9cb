#pragma once

#include "lpchaos/config.hpp"
#include "lpchaos/embedding.hpp"
#include "lpchaos/ensemble.hpp"
#include "lpchaos/error.hpp"
#include "lpchaos/inversion.hpp"
#include "lpchaos/io.hpp"
#include "lpchaos/keys.hpp"
#include "lpchaos/metrics.hpp"
#include "lpchaos/panel.hpp"
#include "lpchaos/pipeline.hpp"
#include "lpchaos/regression.hpp"
#include "lpchaos/shrinkage.hpp"
#include "lpchaos/surrogate.hpp"
#include "lpchaos/util.hpp"
