#pragma once

#include "qep/correction.hpp"
#include "qep/diagnostics.hpp"
#include "qep/errors.hpp"
#include "qep/generate.hpp"
#include "qep/matrix.hpp"
#include "qep/model_io.hpp"
#include "qep/network.hpp"
#include "qep/numerics.hpp"
#include "qep/quantize.hpp"
#include "qep/report_io.hpp"
