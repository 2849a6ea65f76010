#pragma once

#include "sid/common.hpp"
#include "sid/fft.hpp"
#include "sid/spectral.hpp"
#include "sid/kernels.hpp"
#include "sid/wigner.hpp"
#include "sid/dynamics.hpp"
#include "sid/charts.hpp"
#include "sid/classical.hpp"
#include "sid/io.hpp"
#include "sid/scenario.hpp"
