#pragma once

#include "panelid/experiment.hpp"
#include "panelid/fit.hpp"
#include "panelid/gen.hpp"
#include "panelid/ident.hpp"
#include "panelid/jtilde.hpp"
#include "panelid/likelihood.hpp"
#include "panelid/matrices.hpp"
#include "panelid/minors.hpp"
#include "panelid/pack.hpp"
#include "panelid/poly.hpp"
#include "panelid/rng.hpp"
#include "panelid/roots.hpp"
#include "panelid/simulate.hpp"
#include "panelid/theta.hpp"
