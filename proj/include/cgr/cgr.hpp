#pragma once

#include "cgr/amr.hpp"
#include "cgr/chains.hpp"
#include "cgr/config.hpp"
#include "cgr/dataset.hpp"
#include "cgr/encoder.hpp"
#include "cgr/errors.hpp"
#include "cgr/explain.hpp"
#include "cgr/gradcheck.hpp"
#include "cgr/index.hpp"
#include "cgr/io.hpp"
#include "cgr/losses.hpp"
#include "cgr/pipeline.hpp"
#include "cgr/reader.hpp"
#include "cgr/retriever.hpp"
#include "cgr/semgraph.hpp"
#include "cgr/synthetic.hpp"
#include "cgr/text.hpp"
#include "cgr/trainer.hpp"
