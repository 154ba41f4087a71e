// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "waffle/dom.hpp"
#include "waffle/metrics.hpp"

namespace waffle {
namespace {

// Lenient UTF-8 decode: a malformed byte stands for itself.
std::vector<char32_t> code_points(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b = static_cast<unsigned char>(s[i]);
        int len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
        bool ok = len > 0 && i + static_cast<std::size_t>(len) <= s.size();
        char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
        for (int k = 1; ok && k < len; ++k) {
            const auto c = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
            if ((c & 0xC0) != 0x80) ok = false;
            cp = (cp << 6) | (c & 0x3F);
        }
        if (!ok) {
            out.push_back(0x110000u + b);  // outside the Unicode range, so never equal to a real code point
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(len);
    }
    return out;
}

}  // namespace

std::size_t code_point_length(std::string_view s) { return code_points(s).size(); }

std::size_t edit_distance(std::string_view a, std::string_view b) {
    const auto x = code_points(a);
    const auto y = code_points(b);
    std::vector<std::size_t> row(y.size() + 1);
    for (std::size_t j = 0; j <= y.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= x.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= y.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (x[i - 1] == y[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[y.size()];
}

double text_similarity(std::string_view a, std::string_view b) {
    const std::size_t longest = std::max(code_point_length(a), code_point_length(b));
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

// Hungarian method with potentials on costs, rows <= cols, 1-based inside.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights) {
    const std::size_t rows = weights.size();
    const std::size_t cols = rows ? weights[0].size() : 0;
    for (const auto& r : weights) {
        if (r.size() != cols) throw std::invalid_argument("max_weight_assignment: ragged matrix");
    }
    if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
    if (rows > cols) {
        std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t[j][i] = weights[i][j];
        const auto by_col = max_weight_assignment(t);
        std::vector<int> out(rows, -1);
        for (std::size_t j = 0; j < cols; ++j) {
            if (by_col[j] >= 0) out[static_cast<std::size_t>(by_col[j])] = static_cast<int>(j);
        }
        return out;
    }

    const std::size_t n = rows, m = cols;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(m + 1, 0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    auto cost = [&](std::size_t i, std::size_t j) { return -weights[i - 1][j - 1]; };
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> out(n, -1);
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] != 0) out[p[j] - 1] = static_cast<int>(j - 1);
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> llem_matching(const BlockList& gt, const BlockList& gen) {
    std::vector<std::vector<double>> w(gt.size(), std::vector<double>(gen.size(), 0.0));
    for (std::size_t i = 0; i < gt.size(); ++i) {
        for (std::size_t j = 0; j < gen.size(); ++j) {
            const double s = text_similarity(gt[i].text, gen[j].text);
            // Pairs below the threshold are not edges at all.
            w[i][j] = s >= kLlemMinSimilarity ? s : 0.0;
        }
    }
    const auto assign = max_weight_assignment(w);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < assign.size(); ++i) {
        if (assign[i] < 0) continue;
        const auto j = static_cast<std::size_t>(assign[i]);
        if (w[i][j] >= kLlemMinSimilarity) out.emplace_back(i, j);
    }
    return out;
}

LlemScore llem_score_for(const BlockList& gt, const BlockList& gen,
                         const std::vector<std::pair<std::size_t, std::size_t>>& matches, Viewport viewport) {
    LlemScore s;
    if (gt.empty() && gen.empty()) return {100, 100, 100, 100, 100};
    if (gt.empty() || gen.empty() || matches.empty()) return s;
    if (viewport.width <= 0 || viewport.height <= 0) throw std::invalid_argument("llem: viewport must be positive");

    double total_len = 0;
    for (const auto& b : gt) total_len += static_cast<double>(code_point_length(b.text));
    for (const auto& b : gen) total_len += static_cast<double>(code_point_length(b.text));

    double matched_len = 0, text = 0, position = 0, color = 0;
    for (const auto& [i, j] : matches) {
        const TextBlock& a = gt[i];
        const TextBlock& b = gen[j];
        matched_len += static_cast<double>(code_point_length(a.text) + code_point_length(b.text));
        text += text_similarity(a.text, b.text);
        const double dx = std::abs(a.bbox.center_x() - b.bbox.center_x()) / viewport.width;
        const double dy = std::abs(a.bbox.center_y() - b.bbox.center_y()) / viewport.height;
        position += std::clamp(1.0 - std::max(dx, dy), 0.0, 1.0);
        double d2 = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double d = static_cast<double>(a.color[c]) - static_cast<double>(b.color[c]);
            d2 += d * d;
        }
        color += 1.0 - std::sqrt(d2) / (255.0 * std::sqrt(3.0));
    }
    const double n = static_cast<double>(matches.size());
    // Blocks made only of empty strings carry no length; fall back to counts.
    s.block_match = total_len > 0 ? 100.0 * matched_len / total_len
                                  : 100.0 * 2.0 * n / static_cast<double>(gt.size() + gen.size());
    s.text = 100.0 * text / n;
    s.position = 100.0 * position / n;
    s.color = 100.0 * color / n;
    s.average = (s.block_match + s.text + s.position + s.color) / 4.0;
    return s;
}

LlemScore llem(const BlockList& gt, const BlockList& gen, Viewport viewport) {
    return llem_score_for(gt, gen, llem_matching(gt, gen), viewport);
}

double clip_cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("clip-cos: vectors differ in dimension");
    if (a.empty()) throw DimensionMismatch("clip-cos: vectors are empty");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw NonFinite("clip-cos: non-finite component");
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) throw ZeroVector("clip-cos: zero vector");
    return 100.0 * dot / (std::sqrt(na) * std::sqrt(nb));
}

bool html_match(std::string_view gt, std::string_view gen, Renderer& renderer) {
    const std::string sa = strip_presentation(parse_html(std::string(gt)));
    const std::string sb = strip_presentation(parse_html(std::string(gen)));
    const std::vector<std::string> docs{sa, sb};
    const auto results = renderer.render_batch(docs);
    if (results[0].status == RenderStatus::kFailed || !results[0].image) throw RenderError("ground truth", results[0].reason);
    if (results[1].status == RenderStatus::kFailed || !results[1].image) throw RenderError("generated", results[1].reason);
    return *results[0].image == *results[1].image;
}

}  // namespace waffle
