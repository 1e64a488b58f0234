#pragma once

#include "viewfit/classify.hpp"
#include "viewfit/error.hpp"
#include "viewfit/io.hpp"
#include "viewfit/models.hpp"
#include "viewfit/predict.hpp"
#include "viewfit/random.hpp"
#include "viewfit/regress.hpp"
#include "viewfit/report.hpp"
#include "viewfit/series.hpp"
#include "viewfit/synth.hpp"

namespace viewfit {
inline constexpr const char* kVersion = "0.1.0";
}
