#pragma once

// Umbrella header.

#include "pepeval/decimal.hpp"
#include "pepeval/decoding.hpp"
#include "pepeval/extraction.hpp"
#include "pepeval/gateway.hpp"
#include "pepeval/metrics.hpp"
#include "pepeval/pot.hpp"
#include "pepeval/problems.hpp"
#include "pepeval/prompts.hpp"
#include "pepeval/runner.hpp"
#include "pepeval/sha256.hpp"
#include "pepeval/util.hpp"
