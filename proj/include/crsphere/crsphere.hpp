#pragma once

#include "crsphere/error.hpp"
#include "crsphere/jet.hpp"
#include "crsphere/expr.hpp"
#include "crsphere/patch.hpp"
#include "crsphere/ode.hpp"
#include "crsphere/sphericity.hpp"
