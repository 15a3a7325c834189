// qsync.hpp - umbrella header for the qsync library

#pragma once

#include "qsync/errors.hpp"
#include "qsync/expm.hpp"
#include "qsync/spin_model.hpp"
#include "qsync/bath.hpp"
#include "qsync/state.hpp"
#include "qsync/dynamics.hpp"
#include "qsync/signal.hpp"
#include "qsync/parallel.hpp"
#include "qsync/probe.hpp"
#include "qsync/io.hpp"
