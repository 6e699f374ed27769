#pragma once

#include "kacflow/base_dynamics.hpp"
#include "kacflow/errors.hpp"
#include "kacflow/expression.hpp"
#include "kacflow/formulas.hpp"
#include "kacflow/numeric.hpp"
#include "kacflow/oracle.hpp"
#include "kacflow/parallel.hpp"
#include "kacflow/recurrence.hpp"
#include "kacflow/roof.hpp"
#include "kacflow/suspension.hpp"
