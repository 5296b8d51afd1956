#pragma once

// Umbrella header for the respira toolkit.

#include "respira/dataset.hpp"
#include "respira/error.hpp"
#include "respira/eval/cross_validate.hpp"
#include "respira/eval/roc.hpp"
#include "respira/eval/splits.hpp"
#include "respira/features.hpp"
#include "respira/matrix.hpp"
#include "respira/models/forest.hpp"
#include "respira/models/logreg.hpp"
#include "respira/models/model.hpp"
#include "respira/models/svm.hpp"
#include "respira/models/tree.hpp"
#include "respira/parallel.hpp"
#include "respira/pipeline.hpp"
#include "respira/preprocess.hpp"
#include "respira/random.hpp"
#include "respira/report/svg.hpp"
#include "respira/spectral.hpp"
