#pragma once

#include "km/algebra.hpp"
#include "km/builder.hpp"
#include "km/calculus.hpp"
#include "km/derivation_io.hpp"
#include "km/eliminate.hpp"
#include "km/error.hpp"
#include "km/formula.hpp"
