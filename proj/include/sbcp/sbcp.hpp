#pragma once

#include "sbcp/config.hpp"
#include "sbcp/environments.hpp"
#include "sbcp/errors.hpp"
#include "sbcp/feedback.hpp"
#include "sbcp/harness.hpp"
#include "sbcp/metrics.hpp"
#include "sbcp/policies.hpp"
#include "sbcp/rng.hpp"
#include "sbcp/threshold.hpp"
#include "sbcp/truncated_ecdf.hpp"
