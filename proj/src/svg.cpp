#include "crashsev/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "crashsev/rng.hpp"

namespace crashsev::svg {

namespace {

// Shortest %.6g rendering; enough precision for figures while keeping the
// files small and diff-friendly.
std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr int kBlue[3] = {0x1f, 0x77, 0xb4};
constexpr int kRed[3] = {0xd6, 0x27, 0x28};

// Linear blue->red ramp; t in [0,1].
std::string ramp_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                  static_cast<int>(std::lround(kBlue[0] + t * (kRed[0] - kBlue[0]))),
                  static_cast<int>(std::lround(kBlue[1] + t * (kRed[1] - kBlue[1]))),
                  static_cast<int>(std::lround(kBlue[2] + t * (kRed[2] - kBlue[2]))));
    return buf;
}

void open_svg(std::ostringstream& out, double w, double h, const std::string& extra_attrs) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w) << "\" height=\""
        << fmt(h) << "\" viewBox=\"0 0 " << fmt(w) << " " << fmt(h) << "\"" << extra_attrs
        << ">\n";
    out << "<style>text{font-family:sans-serif;font-size:11px;fill:#333}"
           ".title{font-size:14px;font-weight:bold}</style>\n";
    out << "<rect width=\"" << fmt(w) << "\" height=\"" << fmt(h) << "\" fill=\"#ffffff\"/>\n";
}

void title_text(std::ostringstream& out, double w, const std::string& title) {
    out << "<text class=\"title\" x=\"" << fmt(w / 2) << "\" y=\"20\" text-anchor=\"middle\">"
        << escape_xml(title) << "</text>\n";
}

}  // namespace

std::string importance_bars(const std::vector<BarEntry>& entries, const std::string& title) {
    const double left = 200, right = 60, top = 36, bottom = 16;
    const double bar_h = 16, gap = 6;
    const double plot_w = 420;
    const double w = left + plot_w + right;
    const double h = top + entries.size() * (bar_h + gap) + bottom;

    double vmax = 0;
    for (const auto& e : entries) vmax = std::max(vmax, e.value);
    if (vmax <= 0) vmax = 1;

    std::ostringstream out;
    open_svg(out, w, h, "");
    title_text(out, w, title);
    out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left)
        << "\" y2=\"" << fmt(h - bottom) << "\" stroke=\"#999\"/>\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const double y = top + i * (bar_h + gap);
        const double bw = std::max(0.0, entries[i].value) / vmax * plot_w;
        out << "<rect class=\"bar\" x=\"" << fmt(left) << "\" y=\"" << fmt(y) << "\" width=\""
            << fmt(bw) << "\" height=\"" << fmt(bar_h) << "\" fill=\"#1f77b4\"/>\n";
        out << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(y + bar_h - 4)
            << "\" text-anchor=\"end\">" << escape_xml(entries[i].label) << "</text>\n";
        out << "<text x=\"" << fmt(left + bw + 4) << "\" y=\"" << fmt(y + bar_h - 4) << "\">"
            << fmt(entries[i].value) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string summary_dot_plot(const std::vector<DotSeries>& series, const std::string& title) {
    const double left = 200, right = 90, top = 36, bottom = 34;
    const double row_h = 24;
    const double plot_w = 460;
    const double w = left + plot_w + right;
    const double h = top + series.size() * row_h + bottom;

    double m = 0;
    for (const auto& s : series)
        for (double p : s.phi) m = std::max(m, std::fabs(p));
    if (m <= 0) m = 1e-12;
    auto x_of = [&](double phi) { return left + (phi + m) / (2 * m) * plot_w; };

    std::ostringstream out;
    open_svg(out, w, h, "");
    out << "<defs><linearGradient id=\"vramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
           "<stop offset=\"0\" stop-color=\"#1f77b4\"/>"
           "<stop offset=\"1\" stop-color=\"#d62728\"/></linearGradient></defs>\n";
    title_text(out, w, title);

    // zero reference line
    out << "<line x1=\"" << fmt(x_of(0)) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(x_of(0))
        << "\" y2=\"" << fmt(h - bottom) << "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";

    for (std::size_t fi = 0; fi < series.size(); ++fi) {
        const auto& s = series[fi];
        const double yc = top + fi * row_h + row_h / 2;
        out << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(yc + 4)
            << "\" text-anchor=\"end\">" << escape_xml(s.feature) << "</text>\n";

        double vmin = 0, vmax = 0;
        if (!s.value.empty()) {
            auto [lo, hi] = std::minmax_element(s.value.begin(), s.value.end());
            vmin = *lo;
            vmax = *hi;
        }
        Rng jitter(derive_seed(0, "dot-jitter", fi));
        for (std::size_t i = 0; i < s.phi.size(); ++i) {
            const double t = vmax > vmin ? (s.value[i] - vmin) / (vmax - vmin) : 0.5;
            const double dy = (jitter.next_double() - 0.5) * (row_h - 8);
            out << "<circle class=\"dot\" cx=\"" << fmt(x_of(s.phi[i])) << "\" cy=\""
                << fmt(yc + dy) << "\" r=\"3\" fill=\"" << ramp_color(t)
                << "\" fill-opacity=\"0.8\"/>\n";
        }
    }

    // axis with end ticks
    const double ay = h - bottom + 4;
    out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(ay) << "\" x2=\"" << fmt(left + plot_w)
        << "\" y2=\"" << fmt(ay) << "\" stroke=\"#999\"/>\n";
    out << "<text x=\"" << fmt(left) << "\" y=\"" << fmt(ay + 14) << "\" text-anchor=\"middle\">"
        << fmt(-m) << "</text>\n";
    out << "<text x=\"" << fmt(x_of(0)) << "\" y=\"" << fmt(ay + 14)
        << "\" text-anchor=\"middle\">0</text>\n";
    out << "<text x=\"" << fmt(left + plot_w) << "\" y=\"" << fmt(ay + 14)
        << "\" text-anchor=\"middle\">" << fmt(m) << "</text>\n";

    // value legend: vertical gradient bar, low at the bottom
    const double lx = w - right + 30, ly = top + 10, lh = std::max(60.0, h - top - bottom - 20);
    out << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(ly)
        << "\" width=\"10\" height=\"" << fmt(lh) << "\" fill=\"url(#vramp)\"/>\n";
    out << "<text x=\"" << fmt(lx + 14) << "\" y=\"" << fmt(ly + 8) << "\">high</text>\n";
    out << "<text x=\"" << fmt(lx + 14) << "\" y=\"" << fmt(ly + lh) << "\">low</text>\n";

    out << "</svg>\n";
    return out.str();
}

std::string force_plot(const attribution::ForceData& fd, const std::string& title) {
    double sum_phi = 0;
    for (const auto& e : fd.entries) sum_phi += e.phi;

    const double left = 230, right = 60, top = 56, bottom = 20;
    const double row_h = 22;
    const double plot_w = 430;
    const double w = left + plot_w + right;
    const double h = top + fd.entries.size() * row_h + bottom;

    // cumulative walk base -> base + sum(phi)
    std::vector<double> cum(fd.entries.size() + 1);
    cum[0] = fd.base_value;
    for (std::size_t i = 0; i < fd.entries.size(); ++i) cum[i + 1] = cum[i] + fd.entries[i].phi;

    double lo = std::min(fd.base_value, fd.fx), hi = std::max(fd.base_value, fd.fx);
    for (double c : cum) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    double span = hi - lo;
    if (span <= 0) span = 1;
    lo -= 0.05 * span;
    hi += 0.05 * span;
    auto x_of = [&](double v) { return left + (v - lo) / (hi - lo) * plot_w; };

    std::ostringstream out;
    std::ostringstream attrs;
    attrs << " data-base=\"" << fmt(fd.base_value) << "\" data-fx=\"" << fmt(fd.fx)
          << "\" data-sum-phi=\"" << fmt(sum_phi) << "\"";
    open_svg(out, w, h, attrs.str());
    title_text(out, w, title);

    // reference verticals at the start and end of the walk
    out << "<line x1=\"" << fmt(x_of(fd.base_value)) << "\" y1=\"" << fmt(top - 18)
        << "\" x2=\"" << fmt(x_of(fd.base_value)) << "\" y2=\"" << fmt(h - bottom)
        << "\" stroke=\"#999\" stroke-dasharray=\"4,3\"/>\n";
    out << "<text x=\"" << fmt(x_of(fd.base_value)) << "\" y=\"" << fmt(top - 22)
        << "\" text-anchor=\"middle\">base = " << fmt(fd.base_value) << "</text>\n";
    out << "<line x1=\"" << fmt(x_of(fd.fx)) << "\" y1=\"" << fmt(top - 4) << "\" x2=\""
        << fmt(x_of(fd.fx)) << "\" y2=\"" << fmt(h - bottom) << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << fmt(x_of(fd.fx)) << "\" y=\"" << fmt(top - 8)
        << "\" text-anchor=\"middle\">f(x) = " << fmt(fd.fx) << "</text>\n";

    for (std::size_t i = 0; i < fd.entries.size(); ++i) {
        const auto& e = fd.entries[i];
        const double y = top + i * row_h + row_h / 2;
        const double x1 = x_of(cum[i]), x2 = x_of(cum[i + 1]);
        const char* color = e.phi > 0 ? "#d62728" : "#1f77b4";
        const double head = x2 >= x1 ? 6.0 : -6.0;
        out << "<line class=\"force-arrow\" x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y)
            << "\" x2=\"" << fmt(x2 - head) << "\" y2=\"" << fmt(y) << "\" stroke=\"" << color
            << "\" stroke-width=\"8\"/>\n";
        out << "<polygon points=\"" << fmt(x2) << "," << fmt(y) << " " << fmt(x2 - head) << ","
            << fmt(y - 6) << " " << fmt(x2 - head) << "," << fmt(y + 6) << "\" fill=\"" << color
            << "\"/>\n";
        out << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(y + 4)
            << "\" text-anchor=\"end\">" << escape_xml(e.name) << " = " << escape_xml(e.value)
            << " (" << fmt(e.phi) << ")</text>\n";
    }

    out << "</svg>\n";
    return out.str();
}

}  // namespace crashsev::svg
