#pragma once

#include "qelect/adversaries.hpp"
#include "qelect/aqkd.hpp"
#include "qelect/ballot.hpp"
#include "qelect/bitstring.hpp"
#include "qelect/credentials.hpp"
#include "qelect/ecc.hpp"
#include "qelect/election.hpp"
#include "qelect/errors.hpp"
#include "qelect/harness.hpp"
#include "qelect/otp.hpp"
#include "qelect/qubit.hpp"
#include "qelect/rng.hpp"
#include "qelect/stats.hpp"
#include "qelect/transcript.hpp"
