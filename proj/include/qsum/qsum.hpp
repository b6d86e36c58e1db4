#pragma once

#include "dsl.hpp"
#include "equation.hpp"
#include "errors.hpp"
#include "formal.hpp"
#include "growth.hpp"
#include "json_io.hpp"
#include "newton.hpp"
#include "pipeline.hpp"
#include "qborel.hpp"
#include "qlaplace.hpp"
#include "roots.hpp"
#include "scaled.hpp"
#include "series.hpp"
#include "square.hpp"
