#pragma once

// Keyed micro-distortion of sensor streams and hidden-attacker detection.

#include "attacker.hpp"
#include "csv.hpp"
#include "detection.hpp"
#include "distortion.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "keystream.hpp"
#include "random.hpp"
#include "trace.hpp"
