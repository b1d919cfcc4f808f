#pragma once

#include "corrfp/attacks.hpp"
#include "corrfp/boneh_shaw.hpp"
#include "corrfp/core.hpp"
#include "corrfp/correlation.hpp"
#include "corrfp/detection.hpp"
#include "corrfp/fingerprint.hpp"
#include "corrfp/harness.hpp"
#include "corrfp/io.hpp"
#include "corrfp/metrics.hpp"
#include "corrfp/privacy.hpp"
#include "corrfp/rng.hpp"
