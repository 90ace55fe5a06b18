#pragma once

#include "odq/errors.hpp"
#include "odq/model.hpp"
#include "odq/coherent.hpp"
#include "odq/parallel.hpp"
#include "odq/closedform.hpp"
#include "odq/fock/operators.hpp"
#include "odq/fock/spectral.hpp"
#include "odq/fock/density.hpp"
#include "odq/fock/krylov.hpp"
#include "odq/fock/ensemble.hpp"
#include "odq/husimi.hpp"
#include "odq/io.hpp"
#include "odq/cli.hpp"
#include "odq/acceptance.hpp"
