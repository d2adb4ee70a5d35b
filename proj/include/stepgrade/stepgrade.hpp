#ifndef STEPGRADE_STEPGRADE_HPP
#define STEPGRADE_STEPGRADE_HPP

#include "stepgrade/constants.hpp"
#include "stepgrade/dataset.hpp"
#include "stepgrade/difficulty.hpp"
#include "stepgrade/equivalence.hpp"
#include "stepgrade/eval.hpp"
#include "stepgrade/expr.hpp"
#include "stepgrade/grading.hpp"
#include "stepgrade/kendall.hpp"
#include "stepgrade/latex.hpp"
#include "stepgrade/rng.hpp"
#include "stepgrade/rubric.hpp"
#include "stepgrade/solve.hpp"
#include "stepgrade/units.hpp"

#endif  // STEPGRADE_STEPGRADE_HPP
