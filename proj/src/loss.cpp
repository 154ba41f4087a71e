// SPDX-License-Identifier: Apache-2.0

#include "waffle/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace waffle {
namespace {

double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Vec mean_of(const std::vector<Vec>& vs, const char* what) {
    if (vs.empty()) throw EmptyList(std::string(what) + " list is empty");
    const std::size_t d = vs.front().size();
    if (d == 0) throw DimensionMismatch(std::string(what) + " vectors have dimension 0");
    Vec m(d, 0.0);
    for (const auto& v : vs) {
        if (v.size() != d) throw DimensionMismatch(std::string(what) + " vectors differ in dimension");
        for (std::size_t i = 0; i < d; ++i) {
            if (!std::isfinite(v[i])) throw NonFinite(std::string(what) + " embedding is not finite");
            m[i] += v[i];
        }
    }
    for (double& x : m) x /= static_cast<double>(vs.size());
    return m;
}

struct Similarities {
    std::size_t k = 0;
    std::vector<MeanEmbeddings> means;
    std::vector<double> s;  // k x k, s[i*k+j] = cos(t_i, v_j)
    std::vector<double> p;  // row softmax of s
};

Similarities similarities(const GroupBatch& batch) {
    validate_batch(batch);
    Similarities out;
    out.k = batch.samples.size();
    for (const auto& sample : batch.samples) out.means.push_back(mean_embeddings(sample));
    const std::size_t k = out.k;
    out.s.resize(k * k);
    out.p.resize(k * k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) out.s[i * k + j] = cosine_similarity(out.means[i].token, out.means[j].patch);
        const double top = *std::max_element(out.s.begin() + static_cast<std::ptrdiff_t>(i * k),
                                             out.s.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
        double z = 0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(out.s[i * k + j] - top);
        for (std::size_t j = 0; j < k; ++j) out.p[i * k + j] = std::exp(out.s[i * k + j] - top) / z;
    }
    return out;
}

Vec vec_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be an array of numbers");
    Vec v;
    v.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw std::invalid_argument(std::string(what) + " must be an array of numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

std::vector<Vec> vecs_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be an array of arrays");
    std::vector<Vec> out;
    for (const auto& v : j) out.push_back(vec_from_json(v, what));
    return out;
}

}  // namespace

MeanEmbeddings mean_embeddings(const SamplePair& sample) {
    MeanEmbeddings m;
    m.patch = mean_of(sample.patch_embeddings, "patch");
    m.token = mean_of(sample.token_embeddings, "token");
    if (m.patch.size() != m.token.size()) throw DimensionMismatch("patch and token embeddings differ in dimension");
    return m;
}

double cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionMismatch("cosine: vectors differ in dimension");
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0 || nb == 0) throw ZeroVector("cosine: zero vector");
    return dot(a, b) / (na * nb);
}

void validate_batch(const GroupBatch& batch) {
    if (batch.samples.empty()) throw EmptyList("batch has no samples");
    if (!std::isfinite(batch.lambda)) throw NonFinite("lambda is not finite");
    std::size_t d = 0;
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
        const auto& s = batch.samples[i];
        if (s.patch_embeddings.empty()) throw EmptyList("sample " + std::to_string(i) + " has no patch embeddings");
        if (s.token_embeddings.empty()) throw EmptyList("sample " + std::to_string(i) + " has no token embeddings");
        if (s.token_logprobs.size() != s.token_embeddings.size()) {
            throw DimensionMismatch("sample " + std::to_string(i) + ": one log-probability per token required");
        }
        for (double lp : s.token_logprobs) {
            if (!std::isfinite(lp)) throw NonFinite("sample " + std::to_string(i) + ": log-probability is not finite");
            if (lp > 0) throw std::invalid_argument("sample " + std::to_string(i) + ": log-probability above 0");
        }
        const std::size_t di = s.patch_embeddings.front().size();
        if (i == 0) d = di;
        if (di != d) throw DimensionMismatch("samples differ in embedding dimension");
    }
}

double contrastive_loss(const GroupBatch& batch, ContrastiveForm form) {
    const auto sims = similarities(batch);
    double l = 0;
    for (std::size_t i = 0; i < sims.k; ++i) {
        const double pii = sims.p[i * sims.k + i];
        l -= form == ContrastiveForm::kLog ? std::log(pii) : pii;
    }
    return l;
}

double lm_loss(const GroupBatch& batch) {
    validate_batch(batch);
    double l = 0;
    for (const auto& s : batch.samples)
        for (double lp : s.token_logprobs) l -= lp;
    return l;
}

LossValues combined_loss(const GroupBatch& batch, ContrastiveForm form) {
    LossValues v;
    v.l_cl = contrastive_loss(batch, form);
    v.l_lm = lm_loss(batch);
    v.l_total = v.l_lm + batch.lambda * v.l_cl;
    return v;
}

ContrastiveGradient contrastive_gradient(const GroupBatch& batch, ContrastiveForm form) {
    const auto sims = similarities(batch);
    const std::size_t k = sims.k;
    const std::size_t d = sims.means.front().patch.size();

    // dL/ds_ij
    std::vector<double> g(k * k);
    for (std::size_t i = 0; i < k; ++i) {
        const double pii = sims.p[i * k + i];
        for (std::size_t j = 0; j < k; ++j) {
            const double delta = i == j ? 1.0 : 0.0;
            const double dpii = delta - sims.p[i * k + j];  // d log p_ii / d s_ij
            g[i * k + j] = form == ContrastiveForm::kLog ? -dpii : -pii * dpii;
        }
    }

    ContrastiveGradient out;
    out.d_token_mean.assign(k, Vec(d, 0.0));
    out.d_patch_mean.assign(k, Vec(d, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        const Vec& t = sims.means[i].token;
        const double nt = std::sqrt(dot(t, t));
        for (std::size_t j = 0; j < k; ++j) {
            const Vec& v = sims.means[j].patch;
            const double nv = std::sqrt(dot(v, v));
            const double s = sims.s[i * k + j];
            const double gij = g[i * k + j];
            for (std::size_t c = 0; c < d; ++c) {
                out.d_token_mean[i][c] += gij * (v[c] / (nt * nv) - s * t[c] / (nt * nt));
                out.d_patch_mean[j][c] += gij * (t[c] / (nt * nv) - s * v[c] / (nv * nv));
            }
        }
    }
    // Each raw vector enters its mean with weight 1/count.
    for (std::size_t i = 0; i < k; ++i) {
        const auto& sample = batch.samples[i];
        Vec dp = out.d_patch_mean[i];
        for (double& x : dp) x /= static_cast<double>(sample.patch_embeddings.size());
        out.d_patch.emplace_back(sample.patch_embeddings.size(), dp);
        Vec dt = out.d_token_mean[i];
        for (double& x : dt) x /= static_cast<double>(sample.token_embeddings.size());
        out.d_token.emplace_back(sample.token_embeddings.size(), dt);
    }
    return out;
}

GroupBatch batch_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("batch must be a JSON object");
    GroupBatch b;
    if (j.contains("lambda")) {
        if (!j["lambda"].is_number()) throw std::invalid_argument("lambda must be a number");
        b.lambda = j["lambda"].get<double>();
    }
    if (!j.contains("samples") || !j["samples"].is_array()) throw std::invalid_argument("samples must be an array");
    for (const auto& s : j["samples"]) {
        if (!s.is_object()) throw std::invalid_argument("each sample must be an object");
        SamplePair p;
        p.patch_embeddings = vecs_from_json(s.value("patch_embeddings", nlohmann::json::array()), "patch_embeddings");
        p.token_embeddings = vecs_from_json(s.value("token_embeddings", nlohmann::json::array()), "token_embeddings");
        p.token_logprobs = vec_from_json(s.value("token_logprobs", nlohmann::json::array()), "token_logprobs");
        b.samples.push_back(std::move(p));
    }
    return b;
}

nlohmann::json batch_to_json(const GroupBatch& batch) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : batch.samples) {
        samples.push_back({{"patch_embeddings", s.patch_embeddings},
                           {"token_embeddings", s.token_embeddings},
                           {"token_logprobs", s.token_logprobs}});
    }
    return {{"lambda", batch.lambda}, {"samples", samples}};
}

}  // namespace waffle
