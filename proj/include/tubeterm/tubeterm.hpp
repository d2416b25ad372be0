#pragma once

#include "tubeterm/distraction.hpp"
#include "tubeterm/edt.hpp"
#include "tubeterm/errors.hpp"
#include "tubeterm/grid.hpp"
#include "tubeterm/harness.hpp"
#include "tubeterm/metrics.hpp"
#include "tubeterm/nifti_io.hpp"
#include "tubeterm/parallel.hpp"
#include "tubeterm/phantom.hpp"
#include "tubeterm/serialize.hpp"
#include "tubeterm/skeleton.hpp"
#include "tubeterm/terminal.hpp"
