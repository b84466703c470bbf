#pragma once

#include "fusegraph/collection_store.hpp"
#include "fusegraph/error.hpp"
#include "fusegraph/evaluation.hpp"
#include "fusegraph/graph_fusion.hpp"
#include "fusegraph/pipeline.hpp"
#include "fusegraph/semantic_filter.hpp"
#include "fusegraph/sparse.hpp"
#include "fusegraph/synthetic.hpp"
#include "fusegraph/text_expert.hpp"
#include "fusegraph/visual_expert.hpp"
