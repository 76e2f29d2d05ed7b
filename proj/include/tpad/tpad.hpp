#pragma once

#include "tpad/detection.hpp"
#include "tpad/detection_io.hpp"
#include "tpad/error.hpp"
#include "tpad/format.hpp"
#include "tpad/harness.hpp"
#include "tpad/manifest.hpp"
#include "tpad/metrics.hpp"
#include "tpad/spatial.hpp"
#include "tpad/synth.hpp"
