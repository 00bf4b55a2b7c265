#pragma once

#include "orlab/errors.hpp"
#include "orlab/fit.hpp"
#include "orlab/harness.hpp"
#include "orlab/io.hpp"
#include "orlab/problems.hpp"
#include "orlab/spatial.hpp"
#include "orlab/spectra.hpp"
#include "orlab/stepper.hpp"
#include "orlab/tableau.hpp"
#include "orlab/tableau_io.hpp"
