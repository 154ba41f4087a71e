// SPDX-License-Identifier: Apache-2.0
//
// Reference arithmetic for the contrastive and language-modelling losses.
//
// For a group of k samples with mean token embedding t_i and mean patch
// embedding v_i, s_ij = cos(t_i, v_j) and p_ij = softmax_j(s_ij):
//   L_cl  = -sum_i p_ii            (verbatim form)
//   L_cl  = -sum_i log p_ii        (log form, standard InfoNCE)
//   L_lm  = -sum of all token log-probabilities
//   L     = L_lm + lambda * L_cl

#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "waffle/numeric_error.hpp"

namespace waffle {

using Vec = std::vector<double>;

struct SamplePair {
    std::vector<Vec> patch_embeddings;  // M vectors
    std::vector<Vec> token_embeddings;  // N vectors
    std::vector<double> token_logprobs;  // N values, each <= 0
};

struct GroupBatch {
    std::vector<SamplePair> samples;
    double lambda = 0.1;
};

enum class ContrastiveForm { kVerbatim, kLog };

struct MeanEmbeddings {
    Vec patch;  // v-bar
    Vec token;  // t-bar
};

/// Throws EmptyList, DimensionMismatch or NonFinite.
MeanEmbeddings mean_embeddings(const SamplePair& sample);

/// Throws ZeroVector or DimensionMismatch.
double cosine_similarity(const Vec& a, const Vec& b);

/// Checks shapes, finiteness and the sign of log-probabilities.
void validate_batch(const GroupBatch& batch);

double contrastive_loss(const GroupBatch& batch, ContrastiveForm form = ContrastiveForm::kVerbatim);
double lm_loss(const GroupBatch& batch);

struct LossValues {
    double l_cl = 0;
    double l_lm = 0;
    double l_total = 0;
};

LossValues combined_loss(const GroupBatch& batch, ContrastiveForm form = ContrastiveForm::kVerbatim);

/// dL_cl with respect to every raw embedding; shapes mirror the batch.
struct ContrastiveGradient {
    std::vector<Vec> d_patch_mean;  // per sample
    std::vector<Vec> d_token_mean;
    std::vector<std::vector<Vec>> d_patch;  // [sample][patch]
    std::vector<std::vector<Vec>> d_token;  // [sample][token]
};

ContrastiveGradient contrastive_gradient(const GroupBatch& batch, ContrastiveForm form = ContrastiveForm::kVerbatim);

/// `{lambda, samples: [{patch_embeddings, token_embeddings, token_logprobs}]}`;
/// lambda is optional. Throws std::invalid_argument on malformed input.
GroupBatch batch_from_json(const nlohmann::json& j);
nlohmann::json batch_to_json(const GroupBatch& batch);

}  // namespace waffle
