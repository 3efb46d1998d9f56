#pragma once

#include "qksd/core.hpp"
#include "qksd/hamiltonian.hpp"
#include "qksd/statevec.hpp"
#include "qksd/estimators.hpp"
#include "qksd/subspace.hpp"
#include "qksd/geig.hpp"
#include "qksd/workflows.hpp"
#include "qksd/oracle.hpp"
#include "qksd/models.hpp"
#include "qksd/io.hpp"
#include "qksd/config.hpp"
