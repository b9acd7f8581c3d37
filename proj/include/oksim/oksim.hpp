#pragma once

#include "oksim/analysis.hpp"
#include "oksim/biphoton.hpp"
#include "oksim/config.hpp"
#include "oksim/dispersion.hpp"
#include "oksim/fft.hpp"
#include "oksim/fit.hpp"
#include "oksim/grid.hpp"
#include "oksim/heatmap.hpp"
#include "oksim/kerr_gate.hpp"
#include "oksim/matrix_io.hpp"
#include "oksim/moments.hpp"
#include "oksim/parallel.hpp"
#include "oksim/pipeline.hpp"
#include "oksim/random.hpp"
#include "oksim/report.hpp"
#include "oksim/scan.hpp"
#include "oksim/timetag.hpp"
#include "oksim/units.hpp"
