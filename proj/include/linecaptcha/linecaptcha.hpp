#pragma once

// Umbrella header for the transport-free parts of the library.

#include "linecaptcha/attack_lab.hpp"
#include "linecaptcha/challenge_gen.hpp"
#include "linecaptcha/geometry.hpp"
#include "linecaptcha/grader.hpp"
#include "linecaptcha/image.hpp"
#include "linecaptcha/json_io.hpp"
#include "linecaptcha/rng.hpp"
#include "linecaptcha/service.hpp"
