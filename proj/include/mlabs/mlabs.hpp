#pragma once

#include "mlabs/errors.hpp"
#include "mlabs/bspline.hpp"
#include "mlabs/tensor_basis.hpp"
#include "mlabs/distributions.hpp"
#include "mlabs/dataset.hpp"
#include "mlabs/hyperparams.hpp"
#include "mlabs/knots.hpp"
#include "mlabs/model.hpp"
#include "mlabs/chain.hpp"
#include "mlabs/sampler.hpp"
#include "mlabs/probit.hpp"
#include "mlabs/benchmarks.hpp"
#include "mlabs/chain_io.hpp"
#include "mlabs/config.hpp"
#include "mlabs/workflows.hpp"
