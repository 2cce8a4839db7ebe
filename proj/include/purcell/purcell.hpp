#pragma once

#include "purcell/types.hpp"
#include "purcell/linalg.hpp"
#include "purcell/greens.hpp"
#include "purcell/steadystate.hpp"
#include "purcell/fluctuations.hpp"
#include "purcell/kerr.hpp"
#include "purcell/freespace.hpp"
#include "purcell/oracle.hpp"
