#pragma once

#include "scivr/types.hpp"
#include "scivr/pes.hpp"
#include "scivr/dynamics.hpp"
#include "scivr/stability.hpp"
#include "scivr/prefactor.hpp"
#include "scivr/fft.hpp"
#include "scivr/spectrum.hpp"
#include "scivr/dvr.hpp"
#include "scivr/config.hpp"
#include "scivr/orchestrator.hpp"
