// SPDX-License-Identifier: Apache-2.0
//
// In-process WebDriver endpoint for tests. It implements just the commands
// the render client issues and "renders" pages with a toy layout: every
// visible text node becomes a bar on its own line, images become grey
// squares. Output is deterministic, so equal documents give equal pixels.

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "waffle/blocks.hpp"
#include "waffle/image.hpp"
#include "waffle/render.hpp"

namespace waffle::testing {

struct ToyPage {
    Image image;
    BlockList blocks;
};

/// The stub's layout, exposed so tests can compare against it directly.
ToyPage toy_layout(std::string_view html, int width, int height);

/// Marker understood by the stub's execute endpoint: scripts containing it
/// return the extracted blocks.
inline constexpr std::string_view kStubExtractScript = "/* waffle-extract */ return window.__blocks();";
/// Scripts containing this return the color of the n-th extracted block,
/// read back from the page a second time.
inline constexpr std::string_view kStubColorQuery = "/* waffle-color */";

struct StubOptions {
    int chrome_height = 80;       // outer window minus viewport
    int screenshot_extra = 0;     // screenshot larger (>0) or smaller (<0) than the viewport
    int loading_polls = 1;        // readyState reports "loading" this many times per page
    bool reject_sessions = false; // POST /session answers with an error
};

class StubWebDriver {
public:
    explicit StubWebDriver(StubOptions options = {});
    ~StubWebDriver();
    StubWebDriver(const StubWebDriver&) = delete;
    StubWebDriver& operator=(const StubWebDriver&) = delete;

    /// e.g. "http://127.0.0.1:40123"
    std::string endpoint() const;
    WebDriverOptions client_options(int width = 320, int height = 240) const;

    int sessions_created() const { return created_.load(); }
    int sessions_deleted() const { return deleted_.load(); }
    int max_concurrent_renders() const { return max_active_.load(); }

    // Documents containing these markers misbehave.
    static constexpr std::string_view kFailMarker = "<!--stub:fail-->";
    static constexpr std::string_view kHangMarker = "<!--stub:hang-->";
    static constexpr std::string_view kSlowMarker = "<!--stub:slow-->";

private:
    struct State;
    std::unique_ptr<State> state_;
    std::atomic<int> created_{0};
    std::atomic<int> deleted_{0};
    std::atomic<int> max_active_{0};
};

}  // namespace waffle::testing
