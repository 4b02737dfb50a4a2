#ifndef CBNEED_CBNEED_HPP
#define CBNEED_CBNEED_HPP

#include "cbneed/term.hpp"
#include "cbneed/syntax.hpp"
#include "cbneed/renaming.hpp"
#include "cbneed/calculus.hpp"
#include "cbneed/ckplus.hpp"
#include "cbneed/sc.hpp"
#include "cbneed/harness.hpp"

#endif  // CBNEED_CBNEED_HPP
