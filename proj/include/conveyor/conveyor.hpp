#pragma once

#include "conveyor/model.hpp"
#include "conveyor/integrate.hpp"
#include "conveyor/periodic.hpp"
#include "conveyor/homotopy.hpp"
#include "conveyor/analytic.hpp"
#include "conveyor/quadrature.hpp"
#include "conveyor/verify.hpp"
