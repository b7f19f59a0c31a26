#pragma once

#include "bhcsvm/cover.hpp"
#include "bhcsvm/data.hpp"
#include "bhcsvm/dataset.hpp"
#include "bhcsvm/error.hpp"
#include "bhcsvm/evaluation.hpp"
#include "bhcsvm/serialize.hpp"
#include "bhcsvm/svm.hpp"
#include "bhcsvm/tree.hpp"
