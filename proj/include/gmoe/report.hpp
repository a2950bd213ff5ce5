#pragma once

// CSV, JSON and SVG emission for sweep results.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gmoe/experiments.hpp"
#include "gmoe/json_io.hpp"

namespace gmoe {

inline std::string join_sizes(const std::vector<std::size_t>& sizes) {
    std::string out;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(sizes[i]);
    }
    return out;
}

inline std::string results_csv(const SweepResult& sweep) {
    std::string out = "model,k,n,rep,seed,loss_name,loss,loglik,iters,converged,max_cell,excluded\n";
    for (const auto& r : sweep.rows) {
        out += r.model + ',' + std::to_string(r.k) + ',' + std::to_string(r.n) + ',' + std::to_string(r.rep) + ',' +
               std::to_string(r.seed) + ',' + r.loss_name + ',' + format_double(r.loss) + ',' +
               format_double(r.loglik) + ',' + std::to_string(r.iters) + ',' + (r.converged ? "1" : "0") + ',' +
               std::to_string(r.max_cell) + ',' + (r.excluded ? "1" : "0") + '\n';
    }
    return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& summary) {
    std::string out = "n,mean_loss,stderr,count\n";
    for (const auto& s : summary) {
        out += std::to_string(s.n) + ',' + format_double(s.mean_loss) + ',' + format_double(s.stderr_loss) + ',' +
               std::to_string(s.count) + '\n';
    }
    return out;
}

/// Inverse of summary_csv (header required).
inline std::vector<SummaryRow> summary_from_csv(const std::string& text) {
    std::vector<SummaryRow> out;
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos || text.compare(0, 2, "n,") != 0) {
        throw DomainError("summary csv: missing 'n,mean_loss,stderr,count' header");
    }
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos + 1), text.size());
        const std::string line = text.substr(pos + 1, end - pos - 1);
        pos = end;
        if (line.empty()) continue;
        SummaryRow s;
        char a[64], b[64];
        unsigned long long n = 0, count = 0;
        if (std::sscanf(line.c_str(), "%llu,%63[^,],%63[^,],%llu", &n, a, b, &count) != 4) {
            throw DomainError("summary csv: malformed row '" + line + "'");
        }
        s.n = n;
        s.mean_loss = std::strtod(a, nullptr);
        s.stderr_loss = std::strtod(b, nullptr);
        s.count = count;
        out.push_back(s);
    }
    return out;
}

inline Json rate_to_json(const RateFit& fit) {
    Json j;
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["r_squared"] = fit.r_squared;
    return j;
}

/// One row per evaluated loss: model_id,n,rep,k,loss_name,value,cell_sizes
inline std::string loss_report_header() { return "model_id,n,rep,k,loss_name,value,cell_sizes\n"; }

inline std::string loss_report_row(const std::string& model_id, std::size_t n, int rep, std::size_t k,
                                   const std::string& loss_name, double value,
                                   const std::vector<std::size_t>& cell_sizes) {
    return model_id + ',' + std::to_string(n) + ',' + std::to_string(rep) + ',' + std::to_string(k) + ',' +
           loss_name + ',' + format_double(value) + ',' + join_sizes(cell_sizes) + '\n';
}

/// Log-log plot: mean loss with standard-error bars and the fitted line
/// drawn dash-dotted.
inline std::string plot_svg(const std::vector<SummaryRow>& summary, const RateFit& fit, const std::string& title,
                            const std::string& y_label) {
    constexpr double W = 640, H = 480, L = 80, R = 30, T = 40, B = 60;
    std::vector<const SummaryRow*> pts;
    for (const auto& s : summary) {
        if (s.count > 0 && s.mean_loss > 0 && std::isfinite(s.mean_loss)) pts.push_back(&s);
    }
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto* s : pts) {
        const double lo = s->mean_loss - s->stderr_loss > 0 ? s->mean_loss - s->stderr_loss : s->mean_loss;
        xmin = std::min(xmin, std::log10(static_cast<double>(s->n)));
        xmax = std::max(xmax, std::log10(static_cast<double>(s->n)));
        ymin = std::min(ymin, std::log10(lo));
        ymax = std::max(ymax, std::log10(s->mean_loss + s->stderr_loss));
    }
    if (pts.empty()) {
        xmin = 2;
        xmax = 4;
        ymin = -3;
        ymax = 0;
    }
    xmin = std::floor(xmin);
    xmax = std::max(std::ceil(xmax), xmin + 1);
    ymin = std::floor(ymin);
    ymax = std::max(std::ceil(ymax), ymin + 1);
    const auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
    const auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - T - B); };
    const auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
                      "viewBox=\"0 0 640 480\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
    // axes box
    svg += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(W - L - R) + "\" height=\"" +
           num(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(xmin); e <= static_cast<int>(xmax); ++e) {
        const double x = px(e);
        svg += "<line x1=\"" + num(x) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(x) + "\" y2=\"" + num(H - B + 6) +
               "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(x) + "\" y=\"" + num(H - B + 20) + "\" text-anchor=\"middle\">1e" +
               std::to_string(e) + "</text>\n";
        for (int m = 2; m < 10 && e < static_cast<int>(xmax); ++m) {
            const double xm = px(e + std::log10(m));
            svg += "<line x1=\"" + num(xm) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(xm) + "\" y2=\"" +
                   num(H - B + 3) + "\" stroke=\"black\"/>\n";
        }
    }
    for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e) {
        const double y = py(e);
        svg += "<line x1=\"" + num(L - 6) + "\" y1=\"" + num(y) + "\" x2=\"" + num(L) + "\" y2=\"" + num(y) +
               "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(L - 10) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">1e" + std::to_string(e) +
               "</text>\n";
    }
    svg += "<text x=\"" + num((L + W - R) / 2) + "\" y=\"" + num(H - 15) + "\" text-anchor=\"middle\">n</text>\n";
    svg += "<text x=\"20\" y=\"" + num((T + H - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
           num((T + H - B) / 2) + ")\">" + y_label + "</text>\n";

    // error bars and means
    std::string line_points;
    for (const auto* s : pts) {
        const double x = px(std::log10(static_cast<double>(s->n)));
        const double lo = s->mean_loss - s->stderr_loss;
        const double hi = s->mean_loss + s->stderr_loss;
        const double y_hi = py(std::log10(hi));
        const double y_lo = lo > 0 ? py(std::log10(lo)) : H - B;
        svg += "<line x1=\"" + num(x) + "\" y1=\"" + num(y_lo) + "\" x2=\"" + num(x) + "\" y2=\"" + num(y_hi) +
               "\" stroke=\"darkorange\"/>\n";
        svg += "<line x1=\"" + num(x - 3) + "\" y1=\"" + num(y_lo) + "\" x2=\"" + num(x + 3) + "\" y2=\"" +
               num(y_lo) + "\" stroke=\"darkorange\"/>\n";
        svg += "<line x1=\"" + num(x - 3) + "\" y1=\"" + num(y_hi) + "\" x2=\"" + num(x + 3) + "\" y2=\"" +
               num(y_hi) + "\" stroke=\"darkorange\"/>\n";
        const double y = py(std::log10(s->mean_loss));
        svg += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"2.5\" fill=\"darkorange\"/>\n";
        line_points += num(x) + "," + num(y) + " ";
    }
    if (!line_points.empty()) {
        svg += "<polyline points=\"" + line_points + "\" fill=\"none\" stroke=\"darkorange\" stroke-width=\"1.5\"/>\n";
    }

    // fitted line: log10 y = intercept / ln10 + slope * log10 n
    if (!pts.empty()) {
        const double x0 = std::log10(static_cast<double>(pts.front()->n));
        const double x1 = std::log10(static_cast<double>(pts.back()->n));
        const auto fy = [&](double lx) { return fit.intercept / std::log(10.0) + fit.slope * lx; };
        svg += "<line x1=\"" + num(px(x0)) + "\" y1=\"" + num(py(fy(x0))) + "\" x2=\"" + num(px(x1)) + "\" y2=\"" +
               num(py(fy(x1))) + "\" stroke=\"black\" stroke-dasharray=\"8,3,2,3\" stroke-width=\"1.5\"/>\n";
        char legend[96];
        std::snprintf(legend, sizeof legend, "fit: %.3g n^(%.3f)", std::exp(fit.intercept), fit.slope);
        svg += "<text x=\"" + num(W - R - 10) + "\" y=\"" + num(T + 18) + "\" text-anchor=\"end\">" + legend +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace gmoe
