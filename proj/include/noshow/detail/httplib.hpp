#pragma once

// <resolv.h>, pulled in by httplib, defines `res` as a macro; Eigen must be
// seen first and the macro dropped afterwards.
#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <httplib.h>

#ifdef res
#undef res
#endif
