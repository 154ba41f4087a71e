// SPDX-License-Identifier: Apache-2.0
//
// Webpage similarity metrics: HTML-Match, CW-SSIM, LLEM and the embedding
// cosine used as a CLIP score.

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "waffle/blocks.hpp"
#include "waffle/image.hpp"
#include "waffle/numeric_error.hpp"
#include "waffle/render.hpp"

namespace waffle {

// ---- CW-SSIM ----

struct CwSsimParams {
    int size = 256;  // both images are resampled to size x size
    int levels = 4;
    int orientations = 6;
    int window = 7;
    double k = 0.0;

    /// Throws std::invalid_argument when the pyramid does not fit.
    void validate() const;
};

class DegenerateImage : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Complex steerable pyramid subbands, finest level first; within a level,
/// orientation 0 first. Each band is square, row-major.
struct Subband {
    int size = 0;
    std::vector<std::complex<double>> coeffs;
};

std::vector<Subband> steerable_pyramid(const GrayImage& image, int levels, int orientations);

/// Grayscale, resample to params.size, decompose, average the windowed
/// structural similarity over every subband.
double cw_ssim(const Image& a, const Image& b, const CwSsimParams& params = {});
double cw_ssim(const GrayImage& a, const GrayImage& b, const CwSsimParams& params = {});

/// Mean windowed similarity of two equally sized subbands. `floor` is the
/// denominator at or below which a window counts as identical when k == 0.
double band_similarity(const Subband& a, const Subband& b, int window, double k, double floor);

// ---- LLEM ----

struct LlemScore {
    double block_match = 0;
    double text = 0;
    double position = 0;
    double color = 0;
    double average = 0;
};

/// Levenshtein distance over Unicode code points (invalid UTF-8 bytes count
/// as one code point each).
std::size_t edit_distance(std::string_view a, std::string_view b);
std::size_t code_point_length(std::string_view s);
/// 1 - distance / max length; 1 for two empty strings.
double text_similarity(std::string_view a, std::string_view b);

/// Maximum total weight assignment on a dense rows x cols matrix. Returns,
/// for each row, the matched column or -1. Rows and columns may differ in
/// count; zero-weight pairs may be reported as matched.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights);

inline constexpr double kLlemMinSimilarity = 0.5;

/// Matched (gt index, gen index) pairs, sorted by gt index.
std::vector<std::pair<std::size_t, std::size_t>> llem_matching(const BlockList& gt, const BlockList& gen);

LlemScore llem(const BlockList& gt, const BlockList& gen, Viewport viewport = {});

/// Scores for a given matching; exposed so alternative matchers can be
/// scored with the same arithmetic.
LlemScore llem_score_for(const BlockList& gt, const BlockList& gen,
                         const std::vector<std::pair<std::size_t, std::size_t>>& matches, Viewport viewport);

// ---- CLIP cosine ----

/// 100 * cosine similarity.
double clip_cosine(std::span<const double> a, std::span<const double> b);

// ---- HTML-Match ----

class RenderError : public std::runtime_error {
public:
    RenderError(std::string side, std::string reason)
        : std::runtime_error(side + " render failed: " + reason), side_(std::move(side)) {}
    const std::string& side() const { return side_; }

private:
    std::string side_;
};

/// Strips style elements and attributes from both documents, renders both,
/// and compares pixels exactly.
bool html_match(std::string_view gt, std::string_view gen, Renderer& renderer);

}  // namespace waffle
