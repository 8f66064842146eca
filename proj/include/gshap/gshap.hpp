#pragma once

#include "gshap/coalition.hpp"
#include "gshap/errors.hpp"
#include "gshap/io.hpp"
#include "gshap/matrix.hpp"
#include "gshap/numsolve.hpp"
#include "gshap/partial.hpp"
#include "gshap/roy.hpp"
#include "gshap/shapley.hpp"
