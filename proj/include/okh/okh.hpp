#pragma once

#include "okh/error.hpp"
#include "okh/hash.hpp"
#include "okh/random.hpp"
#include "okh/vocabulary.hpp"
#include "okh/hypergraph.hpp"
#include "okh/precedence.hpp"
#include "okh/snapshot.hpp"
#include "okh/embedding.hpp"
#include "okh/remote_embedder.hpp"
#include "okh/transition.hpp"
#include "okh/retrieval.hpp"
#include "okh/retriever.hpp"
#include "okh/evidence.hpp"
#include "okh/chat_client.hpp"
#include "okh/corpus.hpp"
#include "okh/ablation.hpp"
#include "okh/parallel.hpp"
